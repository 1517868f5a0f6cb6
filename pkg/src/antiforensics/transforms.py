"""Pixel-domain corruption operators: filtering, resampling, additive noise.

Conventions shared by every operator here:

* arithmetic runs in float64 regardless of input dtype;
* borders are reflect-101 (mirror about the edge pixel, edge not repeated);
* results are quantized back to uint8 if and only if the input was uint8 —
  float callers keep float, and nobody rounds twice;
* randomness comes only from an explicit seed, via numpy's PCG64.

The two fixed kernels are the classic 5x5 Gaussian approximation with integer
weights summing to 273 and the 4-neighbour sharpen kernel; both sum to one, so
flat fields pass through unchanged.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .image import ImageBuffer, quantize_u8

__all__ = [
    "Kernel2D",
    "ResizeSpec",
    "GAUSSIAN_BLUR_5X5",
    "SHARPEN_3X3",
    "convolve2d",
    "blur5",
    "sharpen3",
    "resize",
    "add_gaussian_noise",
]


@dataclasses.dataclass(frozen=True)
class Kernel2D:
    """A named, odd-sized 2-D filter used with correlation semantics."""

    name: str
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] % 2 == 0 or w.shape[1] % 2 == 0:
            raise ValueError(f"kernel must be odd-sized 2-D, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("kernel weights must be finite")
        w = np.array(w, copy=True)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


# Integer form of the 5x5 Gaussian; the real kernel divides by 273.
_BLUR5_TABLE = np.array(
    [
        [1, 4, 7, 4, 1],
        [4, 16, 26, 16, 4],
        [7, 26, 41, 26, 7],
        [4, 16, 26, 16, 4],
        [1, 4, 7, 4, 1],
    ],
    dtype=np.float64,
)

GAUSSIAN_BLUR_5X5 = Kernel2D("gaussian-blur-5x5", _BLUR5_TABLE / 273.0)

SHARPEN_3X3 = Kernel2D(
    "sharpen-3x3",
    np.array([[0, -1, 0], [-1, 5, -1], [0, -1, 0]], dtype=np.float64),
)


def _as_float_array(img):
    """(array3d, was_uint8) from an ImageBuffer or ndarray."""
    buf = img if isinstance(img, ImageBuffer) else ImageBuffer(np.asarray(img))
    return buf.data.astype(np.float64, copy=False), not buf.is_float


def _finish(arr, was_uint8):
    return quantize_u8(arr) if was_uint8 else ImageBuffer(arr)


def convolve2d(img, kernel: Kernel2D) -> ImageBuffer:
    """Per-channel 2-D correlation (kernel not flipped) with reflect-101 borders.

    The accumulation walks kernel taps in row-major order, one fused
    multiply-add over the whole image per tap. That fixed order is part of the
    contract: a scalar loop summing taps the same way reproduces this output
    bit for bit, which is exactly how the tests check it.
    """
    arr, was_u8 = _as_float_array(img)
    kw = np.asarray(kernel.weights, dtype=np.float64)
    kh2, kw2 = kw.shape[0] // 2, kw.shape[1] // 2
    if arr.shape[0] <= kh2 or arr.shape[1] <= kw2:
        raise ValueError(
            f"image {arr.shape[:2]} too small for reflect-101 padding of "
            f"kernel {kw.shape}"
        )
    pad = np.pad(arr, ((kh2, kh2), (kw2, kw2), (0, 0)), mode="reflect")
    h, w = arr.shape[:2]
    acc = np.zeros_like(arr)
    for i in range(kw.shape[0]):
        for j in range(kw.shape[1]):
            acc += kw[i, j] * pad[i : i + h, j : j + w, :]
    return _finish(acc, was_u8)


def blur5(img) -> ImageBuffer:
    """5x5 Gaussian blur (the 1/273 integer kernel)."""
    return convolve2d(img, GAUSSIAN_BLUR_5X5)


def sharpen3(img) -> ImageBuffer:
    """3x3 sharpen: identity plus 4-neighbour Laplacian."""
    return convolve2d(img, SHARPEN_3X3)


# --- resampling ------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ResizeSpec:
    """Target geometry and interpolation kernel for :func:`resize`.

    ``kernel`` is ``"lanczos4"`` (8-tap windowed sinc) or ``"cubic"`` (4-tap
    Keys spline, a = -0.75).
    """

    width: int
    height: int
    kernel: str = "lanczos4"

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"target size must be positive, got {self.width}x{self.height}")
        if self.kernel not in ("lanczos4", "cubic"):
            raise ValueError(f"unknown resize kernel {self.kernel!r}")


def _cubic_weight(t):
    # Keys cubic with a = -0.75 (the common fixed choice for this tap layout)
    a = -0.75
    at = np.abs(t)
    w = np.where(
        at <= 1.0,
        (a + 2.0) * at**3 - (a + 3.0) * at**2 + 1.0,
        np.where(at < 2.0, a * at**3 - 5.0 * a * at**2 + 8.0 * a * at - 4.0 * a, 0.0),
    )
    return w


def _lanczos4_weight(t):
    at = np.abs(t)
    w = np.where(at < 4.0, np.sinc(t) * np.sinc(t / 4.0), 0.0)
    return w


_KERNELS = {
    "cubic": (_cubic_weight, np.arange(-1, 3)),
    "lanczos4": (_lanczos4_weight, np.arange(-3, 5)),
}


def _axis_taps(src_size: int, dst_size: int, kernel: str):
    """Per-destination-index tap indices (clamped) and renormalized weights.

    Centers map as src = (dst + 0.5) * (src/dst) - 0.5, taps sit on the
    integer neighbours of the centre, out-of-range taps clamp to the edge
    pixel, and each row of weights is divided by its sum so constants survive
    exactly.
    """
    func, offsets = _KERNELS[kernel]
    scale = src_size / dst_size
    centers = (np.arange(dst_size, dtype=np.float64) + 0.5) * scale - 0.5
    base = np.floor(centers).astype(np.int64)
    idx = base[:, None] + offsets[None, :]
    weights = func(idx.astype(np.float64) - centers[:, None])
    weights = weights / weights.sum(axis=1, keepdims=True)
    np.clip(idx, 0, src_size - 1, out=idx)
    return idx, weights


def _resample_axis1(arr, idx, weights):
    """Apply taps along axis 1 of (H, S, C) -> (H, D, C), tap-ordered sums."""
    h, _, c = arr.shape
    d, taps = idx.shape
    out = np.zeros((h, d, c), dtype=np.float64)
    for t in range(taps):
        out += weights[:, t][None, :, None] * arr[:, idx[:, t], :]
    return out


def resize(img, spec: ResizeSpec) -> ImageBuffer:
    """Separable resampling to ``spec.width`` x ``spec.height``.

    No antialias prefilter in either direction — downscaling uses the same
    fixed 4/8-tap kernels as upscaling, which is the behaviour the rest of the
    toolkit is calibrated against. Horizontal pass first, then vertical.
    """
    arr, was_u8 = _as_float_array(img)
    h, w = arr.shape[:2]
    ix, wx = _axis_taps(w, spec.width, spec.kernel)
    iy, wy = _axis_taps(h, spec.height, spec.kernel)
    tmp = _resample_axis1(arr, ix, wx)
    tmp = _resample_axis1(np.swapaxes(tmp, 0, 1), iy, wy)
    out = np.swapaxes(tmp, 0, 1)
    return _finish(np.ascontiguousarray(out), was_u8)


# --- noise -----------------------------------------------------------------


def add_gaussian_noise(img, sigma: float, seed: int) -> ImageBuffer:
    """Add i.i.d. zero-mean Gaussian noise with standard deviation ``sigma``.

    The noise field is drawn in one C-order pass from
    ``numpy.random.Generator(PCG64(seed))``, so a (seed, shape) pair fully
    determines the output on every platform. ``sigma`` is in 8-bit intensity
    units; ``sigma == 0`` returns the input pixels unchanged.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    arr, was_u8 = _as_float_array(img)
    if sigma == 0:
        return _finish(arr.copy(), was_u8)
    rng = np.random.Generator(np.random.PCG64(seed))
    noisy = arr + sigma * rng.standard_normal(size=arr.shape)
    return _finish(noisy, was_u8)
