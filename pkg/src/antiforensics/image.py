"""Image containers and lossless I/O.

The package moves pixels around as :class:`ImageBuffer` values: a read-only
``(H, W, C)`` array with ``C`` in ``{1, 3}``, either ``uint8`` (storage form) or
``float64`` (working form). Buffers are row-major with interleaved samples, and
quantization to 8 bits happens exactly once, at the edge that needs it
(:func:`quantize_u8`), never implicitly.

PNG is the interchange format; encode/decode is delegated to Pillow. The point
of the wrapper is the contract, not the codec: loads reject what the toolkit
cannot represent (16-bit depth, non-PNG payloads) with distinct error types,
and saves refuse float data so no caller can smuggle un-rounded pixels to disk.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    AlphaChannelError,
    FileMissingError,
    MalformedImageError,
    UnquantizedBufferError,
    UnsupportedDepthError,
)

__all__ = [
    "ImageBuffer",
    "load_png",
    "save_png",
    "quantize_u8",
    "to_luma",
]

# BT.601 luma weights, the only colour convention used anywhere in the package.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Pillow modes that mean "more than 8 bits per sample" (or fewer, for mode 1).
_BAD_DEPTH_MODES = {"1", "I", "F", "I;16", "I;16B", "I;16L", "I;16N", "RGB;16"}


@dataclasses.dataclass(frozen=True)
class ImageBuffer:
    """Immutable pixel container.

    ``data`` is always 3-D ``(height, width, channels)`` after construction;
    2-D input is promoted to a single channel. The array is a private copy
    with the writeable flag cleared, so a buffer can be shared freely.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D pixel data, got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"empty image: shape {arr.shape}")
        if arr.dtype == np.uint8:
            pass
        elif np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64, copy=False)
        else:
            raise ValueError(f"dtype must be uint8 or floating, got {arr.dtype}")
        arr = np.array(arr, copy=True, order="C")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    # Convenience accessors -------------------------------------------------

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_float(self) -> bool:
        return self.data.dtype != np.uint8

    def as_float(self) -> "ImageBuffer":
        """Same pixels as float64 (no scaling: uint8 values stay in 0..255)."""
        if self.is_float:
            return self
        return ImageBuffer(self.data.astype(np.float64))

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return (
            self.data.shape == other.data.shape
            and self.data.dtype == other.data.dtype
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self):  # frozen dataclass would otherwise derive one from data
        return hash((self.data.shape, str(self.data.dtype)))


def quantize_u8(img) -> ImageBuffer:
    """Quantize float pixels to uint8.

    Rounding is half-away-from-zero (so 0.5 -> 1, not banker's 0), values are
    clamped to [0, 255] afterwards, and NaNs map to 0. uint8 input is passed
    through unchanged. This is the single place where float data becomes
    storable, keeping every pipeline's "quantize exactly once" rule auditable.
    """
    if isinstance(img, ImageBuffer):
        if not img.is_float:
            return img
        arr = img.data
    else:
        arr = np.asarray(img)
        if arr.dtype == np.uint8:
            return ImageBuffer(arr)
        arr = arr.astype(np.float64, copy=False)
    arr = np.where(np.isnan(arr), 0.0, arr)
    rounded = np.where(arr >= 0.0, np.floor(arr + 0.5), np.ceil(arr - 0.5))
    return ImageBuffer(np.clip(rounded, 0.0, 255.0).astype(np.uint8))


def to_luma(img) -> ImageBuffer:
    """BT.601 luma plane as a float64 single-channel buffer.

    0.299 R + 0.587 G + 0.114 B, computed in float with no rounding; a pure red
    input (255, 0, 0) therefore yields exactly 76.245. Grayscale input is
    returned as its float view.
    """
    buf = img if isinstance(img, ImageBuffer) else ImageBuffer(np.asarray(img))
    if buf.channels == 1:
        return buf.as_float()
    arr = buf.data.astype(np.float64, copy=False)
    r, g, b = LUMA_WEIGHTS
    luma = r * arr[:, :, 0] + g * arr[:, :, 1] + b * arr[:, :, 2]
    return ImageBuffer(luma[:, :, np.newaxis])


def load_png(path, *, drop_alpha: bool = True) -> ImageBuffer:
    """Load an 8-bit PNG as an ImageBuffer.

    Grayscale maps to one channel, RGB to three. Paletted files are expanded
    to RGB. An alpha channel is stripped when ``drop_alpha`` is true (the
    default) and rejected with :class:`AlphaChannelError` otherwise. Distinct
    errors cover the distinct failure modes: missing file, non-PNG/corrupt
    payload, unsupported bit depth.
    """
    p = Path(path)
    if not p.is_file():
        raise FileMissingError(f"no such file: {p}")
    try:
        with Image.open(p) as im:
            if im.format != "PNG":
                raise MalformedImageError(f"{p}: not a PNG (decoded as {im.format})")
            return _from_pil(im, p, drop_alpha)
    except UnidentifiedImageError as exc:
        raise MalformedImageError(f"{p}: not a decodable image") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        # Pillow signals truncated/corrupt streams through OSError.
        raise MalformedImageError(f"{p}: corrupt PNG ({exc})") from exc


def _from_pil(im: Image.Image, origin, drop_alpha: bool) -> ImageBuffer:
    mode = im.mode
    if mode in _BAD_DEPTH_MODES:
        raise UnsupportedDepthError(
            f"{origin}: unsupported bit depth (Pillow mode {mode!r}); only 8-bit"
            " grayscale/RGB PNGs are handled"
        )
    if mode == "P":
        has_alpha = "transparency" in im.info
        im = im.convert("RGBA" if has_alpha else "RGB")
        mode = im.mode
    if mode in ("RGBA", "LA", "PA"):
        if not drop_alpha:
            raise AlphaChannelError(f"{origin}: alpha channel present")
        im = im.convert("RGB" if mode == "RGBA" else "L")
        mode = im.mode
    if mode == "L":
        return ImageBuffer(np.asarray(im, dtype=np.uint8))
    if mode == "RGB":
        return ImageBuffer(np.asarray(im, dtype=np.uint8))
    raise UnsupportedDepthError(f"{origin}: unsupported PNG mode {mode!r}")


def save_png(img: ImageBuffer, path) -> None:
    """Write a uint8 buffer as PNG (grayscale for 1 channel, RGB for 3).

    Float buffers are refused: quantize first, on purpose, with
    :func:`quantize_u8`.
    """
    if not isinstance(img, ImageBuffer):
        img = ImageBuffer(np.asarray(img))
    if img.is_float:
        raise UnquantizedBufferError(
            "refusing to save float pixels; call quantize_u8() first"
        )
    arr = img.data
    if img.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    pil.save(Path(path), format="PNG")
