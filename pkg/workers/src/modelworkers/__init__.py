"""Worker processes serving pretrained restoration and detection models
over the antiforensics line-JSON protocol."""

from .adapters import FAMILIES, Adapter, select_denoiser_checkpoint
from .registry import ModelEntry, ModelRegistry, RegistryError, load_config
from .serve import CAPACITY, PROTOCOL_VERSION, serve

__all__ = [
    "Adapter",
    "CAPACITY",
    "FAMILIES",
    "ModelEntry",
    "ModelRegistry",
    "PROTOCOL_VERSION",
    "RegistryError",
    "load_config",
    "select_denoiser_checkpoint",
    "serve",
]

__version__ = "0.1.0"
