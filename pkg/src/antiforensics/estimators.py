"""Transformer-style wrappers around the pipelines.

Each anti-forensics method is exposed as a small stateless transformer
with the familiar estimator surface: constructor keywords become
``get_params``/``set_params`` parameters, ``fit`` validates and returns
``self``, ``transform`` maps an image (or a list of images) through
:func:`antiforensics.pipelines.run_pipeline`.  No heavy framework is
imported for this; the parameter plumbing is a few lines of signature
introspection.
"""

from __future__ import annotations

import inspect

from .image import ImageBuffer
from .pipelines import PipelineSpec, run_pipeline
from .workerclient import WorkerClient

__all__ = [
    "BlurSharp",
    "DownsizeUpsize",
    "JpegCar",
    "NoiseDenoise",
    "DownscaleUpscale",
]


class _ParamsMixin:
    """get_params/set_params/fit_transform over __init__ keywords."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters are {sorted(valid)}"
                )
            setattr(self, name, value)
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class _PipelineTransformer(_ParamsMixin):
    """Shared fit/transform for the five method wrappers."""

    def _spec(self) -> PipelineSpec:
        raise NotImplementedError

    @staticmethod
    def _as_buffer(x) -> ImageBuffer:
        return x if isinstance(x, ImageBuffer) else ImageBuffer(x)

    def fit(self, X, y=None):
        """Validate parameters and input shape; transformers are stateless."""
        self._spec()  # parameter validation
        if X is not None:
            for item in X if isinstance(X, (list, tuple)) else [X]:
                self._as_buffer(item)
        self.fitted_ = True
        return self

    def transform(self, X):
        spec = self._spec()
        client = None
        if spec.worker is not None and spec.needs_worker:
            client = WorkerClient(spec.worker)
        try:
            if isinstance(X, (list, tuple)):
                return [run_pipeline(self._as_buffer(x), spec, client) for x in X]
            return run_pipeline(self._as_buffer(X), spec, client)
        finally:
            if client is not None:
                client.close()


class BlurSharp(_PipelineTransformer):
    """Gaussian blur followed by sharpening."""

    def __init__(self):
        pass

    def _spec(self) -> PipelineSpec:
        return PipelineSpec("blur-sharp")


class DownsizeUpsize(_PipelineTransformer):
    """Shrink to (w/2, 3h/4) with lanczos4, restore with cubic."""

    def __init__(self):
        pass

    def _spec(self) -> PipelineSpec:
        return PipelineSpec("downsize-upsize")


class JpegCar(_PipelineTransformer):
    """JPEG round trip plus compression-artifact-removal worker."""

    def __init__(self, quality: int = 50, worker=None):
        self.quality = quality
        self.worker = worker

    def _spec(self) -> PipelineSpec:
        return PipelineSpec("jpeg-car", quality=self.quality, worker=self.worker)


class NoiseDenoise(_PipelineTransformer):
    """Additive Gaussian noise plus non-blind denoiser worker."""

    def __init__(self, sigma: float = 15.0, seed: int = 0, worker=None):
        self.sigma = sigma
        self.seed = seed
        self.worker = worker

    def _spec(self) -> PipelineSpec:
        return PipelineSpec(
            "noise-denoise", sigma=self.sigma, seed=self.seed, worker=self.worker
        )


class DownscaleUpscale(_PipelineTransformer):
    """Halve dimensions with lanczos4 plus 2x super-resolution worker."""

    def __init__(self, worker=None):
        self.worker = worker

    def _spec(self) -> PipelineSpec:
        return PipelineSpec("downscale-upscale", worker=self.worker)
