"""Image anti-forensics toolkit: corruption→restoration pipelines that
suppress forgery traces, plus the codecs, quality metrics, and evaluation
plumbing needed to measure them."""

from .errors import (
    AlphaChannelError,
    AntiforensicsError,
    ConfigError,
    FileMissingError,
    ImageIOError,
    JpegError,
    JpegParseError,
    MalformedImageError,
    SchemaError,
    UnquantizedBufferError,
    UnsupportedDepthError,
    UnsupportedJpegError,
    WorkerContractError,
    WorkerError,
    WorkerExitError,
    WorkerProtocolError,
    WorkerTimeoutError,
)
from .image import ImageBuffer, load_png, quantize_u8, save_png, to_luma
from .iqa import (
    BrisqueModel,
    QualityRecord,
    brisque_features,
    brisque_score,
    load_default_model,
    psnr,
    quality_record,
    ssim,
)
from .jpegcodec import JpegConfig, decode_jpeg, encode_jpeg
from .tiling import TileGrid, merge, pad_to_min, plan_tiles, split
from .transforms import (
    GAUSSIAN_BLUR_5X5,
    SHARPEN_3X3,
    Kernel2D,
    ResizeSpec,
    add_gaussian_noise,
    blur5,
    convolve2d,
    resize,
    sharpen3,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaChannelError",
    "AntiforensicsError",
    "BrisqueModel",
    "ConfigError",
    "FileMissingError",
    "GAUSSIAN_BLUR_5X5",
    "ImageBuffer",
    "ImageIOError",
    "JpegConfig",
    "JpegError",
    "JpegParseError",
    "Kernel2D",
    "MalformedImageError",
    "QualityRecord",
    "ResizeSpec",
    "SHARPEN_3X3",
    "SchemaError",
    "TileGrid",
    "UnquantizedBufferError",
    "UnsupportedDepthError",
    "UnsupportedJpegError",
    "WorkerContractError",
    "WorkerError",
    "WorkerExitError",
    "WorkerProtocolError",
    "WorkerTimeoutError",
    "add_gaussian_noise",
    "blur5",
    "brisque_features",
    "brisque_score",
    "convolve2d",
    "decode_jpeg",
    "encode_jpeg",
    "load_default_model",
    "load_png",
    "merge",
    "pad_to_min",
    "plan_tiles",
    "psnr",
    "quality_record",
    "quantize_u8",
    "resize",
    "save_png",
    "sharpen3",
    "split",
    "ssim",
    "to_luma",
    "__version__",
]
