"""Image quality metrics: PSNR, SSIM, and a BRISQUE no-reference scorer.

PSNR and SSIM are full-reference metrics defined on stored 8-bit images.
BRISQUE operates on the luma plane: pixels are normalised by a local
mean/deviance estimate (MSCN), the normalised coefficients and their
four directional neighbour products are summarised by generalised
Gaussian fits, and the resulting 36-dimensional feature vector (18 per
scale, two scales) is scored by an RBF support-vector regressor.

The SVR model lives in a small plain-text file format (see
:class:`BrisqueModel`); a reference model is shipped with the package
and available through :func:`load_default_model`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import ndimage
from scipy.special import gamma as _gamma_fn

from .errors import SchemaError
from .image import ImageBuffer, to_luma
from .transforms import Kernel2D, convolve2d

__all__ = [
    "QualityRecord",
    "BrisqueModel",
    "psnr",
    "ssim",
    "mscn",
    "ggd_fit",
    "aggd_fit",
    "brisque_features",
    "brisque_score",
    "quality_record",
    "load_default_model",
]

_PEAK = 255.0
_SSIM_C1 = (0.01 * _PEAK) ** 2
_SSIM_C2 = (0.03 * _PEAK) ** 2


# --------------------------------------------------------------------------
# full-reference metrics
# --------------------------------------------------------------------------


def _metric_planes(ref: ImageBuffer, dist: ImageBuffer, use_luma: bool):
    """Validate a reference/distorted pair and return float working arrays."""
    if ref.data.shape != dist.data.shape:
        raise ValueError(
            f"image dimensions differ: {ref.data.shape} vs {dist.data.shape}"
        )
    if ref.is_float or dist.is_float:
        raise ValueError("metrics are defined on stored 8-bit images")
    if use_luma:
        return to_luma(ref).data, to_luma(dist).data
    return ref.data.astype(np.float64), dist.data.astype(np.float64)


def psnr(ref: ImageBuffer, dist: ImageBuffer, *, use_luma: bool = False) -> float:
    """Peak signal-to-noise ratio in dB, pooled over all samples.

    Identical images yield ``math.inf``.  With ``use_luma`` the metric is
    computed on the (unquantised) BT.601 luma plane instead of raw RGB.
    """
    a, b = _metric_planes(ref, dist, use_luma)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(_PEAK * _PEAK / mse)


def _ssim_window() -> np.ndarray:
    radius = 5
    sigma = 1.5
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return w / w.sum()


_SSIM_TAPS = _ssim_window()


def _filter_valid(plane: np.ndarray) -> np.ndarray:
    """Separable 11x11 Gaussian, cropped to the valid region."""
    t = ndimage.correlate1d(plane, _SSIM_TAPS, axis=0, mode="nearest")
    t = ndimage.correlate1d(t, _SSIM_TAPS, axis=1, mode="nearest")
    return t[5:-5, 5:-5]


def ssim(ref: ImageBuffer, dist: ImageBuffer, *, use_luma: bool = False) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Statistics are pooled over the valid region only (no padded borders)
    and averaged across channels.  Both images must be at least 11x11.
    """
    a, b = _metric_planes(ref, dist, use_luma)
    if a.shape[0] < 11 or a.shape[1] < 11:
        raise ValueError("images must be at least 11x11 for SSIM")
    values = []
    for c in range(a.shape[2]):
        x = a[:, :, c]
        y = b[:, :, c]
        mu_x = _filter_valid(x)
        mu_y = _filter_valid(y)
        sigma_x = _filter_valid(x * x) - mu_x * mu_x
        sigma_y = _filter_valid(y * y) - mu_y * mu_y
        sigma_xy = _filter_valid(x * y) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + _SSIM_C1) * (2.0 * sigma_xy + _SSIM_C2)
        den = (mu_x**2 + mu_y**2 + _SSIM_C1) * (sigma_x + sigma_y + _SSIM_C2)
        values.append(float(np.mean(num / den)))
    return float(np.mean(values))


# --------------------------------------------------------------------------
# BRISQUE feature extraction
# --------------------------------------------------------------------------


def _mscn_kernel() -> Kernel2D:
    sigma = 7.0 / 6.0
    offsets = np.arange(-3, 4, dtype=np.float64)
    w = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    w /= w.sum()
    return Kernel2D("mscn-gaussian-7x7", np.outer(w, w))


_MSCN_KERNEL = _mscn_kernel()


def _luma_plane(img) -> np.ndarray:
    if isinstance(img, ImageBuffer):
        return to_luma(img).data[:, :, 0]
    plane = np.asarray(img, dtype=np.float64)
    if plane.ndim != 2:
        raise ValueError(f"expected a 2-D luma plane, got shape {plane.shape}")
    return plane


def mscn(img) -> np.ndarray:
    """Mean-subtracted contrast-normalised coefficients of the luma plane.

    Local mean and deviation come from a 7x7 Gaussian window (sigma 7/6)
    with mirrored borders; the stabilising constant in the denominator
    is 1 (pixels in [0, 255]).  Accepts an :class:`ImageBuffer` or a 2-D
    array and returns a float64 plane of the same height and width.
    """
    plane = _luma_plane(img)
    if np.all(plane == plane.flat[0]):
        # analytically zero; the filtered estimate would leave float residue
        return np.zeros_like(plane)
    mu = convolve2d(ImageBuffer(plane), _MSCN_KERNEL).data[:, :, 0]
    second = convolve2d(ImageBuffer(plane**2), _MSCN_KERNEL).data[:, :, 0]
    sigma = np.sqrt(np.abs(second - mu * mu))
    return (plane - mu) / (sigma + 1.0)


_ALPHA_GRID = np.arange(0.2, 10.001, 0.001)
_GGD_RATIO = None
_AGGD_RATIO = None


def _fit_tables():
    # The gamma-ratio lookup tables are small but not free; build them once.
    global _GGD_RATIO, _AGGD_RATIO
    if _GGD_RATIO is None:
        g1 = _gamma_fn(1.0 / _ALPHA_GRID)
        g2 = _gamma_fn(2.0 / _ALPHA_GRID)
        g3 = _gamma_fn(3.0 / _ALPHA_GRID)
        _GGD_RATIO = g1 * g3 / (g2 * g2)
        _AGGD_RATIO = (g2 * g2) / (g1 * g3)
    return _GGD_RATIO, _AGGD_RATIO


def ggd_fit(samples: np.ndarray) -> tuple[float, float]:
    """Fit a zero-mean generalised Gaussian, returning (alpha, sigma).

    The shape parameter is chosen from the grid [0.2, 10] in steps of
    0.001 by matching the moment ratio E[x^2] / E[|x|]^2.
    """
    vec = np.asarray(samples, dtype=np.float64).ravel()
    ggd_ratio, _ = _fit_tables()
    sigma_sq = float(np.mean(vec**2))
    mean_abs = float(np.mean(np.abs(vec)))
    if mean_abs == 0.0:
        return float(_ALPHA_GRID[0]), 0.0
    rho = sigma_sq / (mean_abs * mean_abs)
    alpha = float(_ALPHA_GRID[np.argmin(np.abs(ggd_ratio - rho))])
    return alpha, math.sqrt(sigma_sq)


def aggd_fit(samples: np.ndarray) -> tuple[float, float, float, float]:
    """Fit an asymmetric generalised Gaussian to zero-mean samples.

    Returns ``(alpha, sigma_left, sigma_right, mean)`` where the sigmas
    are the root-mean-square of the strictly negative / strictly
    positive samples and ``mean`` is the distribution mean implied by
    the fit.  If one side is empty the fit is degenerate: alpha pins to
    the bottom of the grid and the mean is 0.
    """
    vec = np.asarray(samples, dtype=np.float64).ravel()
    _, aggd_ratio = _fit_tables()
    left = vec[vec < 0.0]
    right = vec[vec > 0.0]
    sigma_l = math.sqrt(float(np.mean(left**2))) if left.size else 0.0
    sigma_r = math.sqrt(float(np.mean(right**2))) if right.size else 0.0
    if sigma_l == 0.0 or sigma_r == 0.0:
        return float(_ALPHA_GRID[0]), sigma_l, sigma_r, 0.0
    gamma_hat = sigma_l / sigma_r
    mean_abs = float(np.mean(np.abs(vec)))
    second = float(np.mean(vec**2))
    r_hat = (mean_abs * mean_abs) / second
    r_norm = (
        r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / ((gamma_hat**2 + 1.0) ** 2)
    )
    alpha = float(_ALPHA_GRID[np.argmin((aggd_ratio - r_norm) ** 2)])
    g1 = _gamma_fn(1.0 / alpha)
    g2 = _gamma_fn(2.0 / alpha)
    g3 = _gamma_fn(3.0 / alpha)
    mean = (sigma_r - sigma_l) * (g2 / g1) * math.sqrt(g1 / g3)
    return alpha, sigma_l, sigma_r, mean


_PAIR_SHIFTS = ((0, 1), (1, 0), (1, 1), (-1, 1))


def _half_scale(plane: np.ndarray) -> np.ndarray:
    """2x low-pass downscale: average disjoint 2x2 blocks (odd edges dropped)."""
    h2 = plane.shape[0] // 2
    w2 = plane.shape[1] // 2
    trimmed = plane[: 2 * h2, : 2 * w2]
    return (
        trimmed[0::2, 0::2] + trimmed[0::2, 1::2] + trimmed[1::2, 0::2] + trimmed[1::2, 1::2]
    ) / 4.0


def brisque_features(img) -> np.ndarray:
    """36 natural-scene statistics of the luma plane (18 per scale, 2 scales).

    Per scale: (alpha, sigma^2) of a GGD fit to the MSCN coefficients,
    then (alpha, mean, sigma_left^2, sigma_right^2) of AGGD fits to the
    horizontal, vertical and two diagonal neighbour products.  The
    second scale is a 2x low-pass downscale of the first.  Input must be
    at least 32x32.
    """
    plane = _luma_plane(img)
    if plane.shape[0] < 32 or plane.shape[1] < 32:
        raise ValueError(
            f"BRISQUE needs at least 32x32 pixels, got {plane.shape[0]}x{plane.shape[1]}"
        )
    features: list[float] = []
    for _scale in range(2):
        coeffs = mscn(plane)
        alpha, sigma = ggd_fit(coeffs)
        features.extend([alpha, sigma * sigma])
        for shift in _PAIR_SHIFTS:
            pair = coeffs * np.roll(coeffs, shift, axis=(0, 1))
            a, s_l, s_r, mean = aggd_fit(pair)
            features.extend([a, mean, s_l * s_l, s_r * s_r])
        plane = _half_scale(plane)
    return np.asarray(features, dtype=np.float64)


# --------------------------------------------------------------------------
# SVR model and scoring
# --------------------------------------------------------------------------

_MODEL_MAGIC = "brisque-svr"
_MODEL_VERSION = 1
_N_FEATURES = 36


@dataclass(frozen=True)
class BrisqueModel:
    """An RBF support-vector regressor with per-feature scaling ranges.

    Scoring maps features to [-1, 1] by the stored (min, max) ranges and
    evaluates ``sum_i coef_i * exp(-gamma * ||x - sv_i||^2) - rho``.
    """

    gamma: float
    rho: float
    ranges: np.ndarray
    support_vectors: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        ranges = np.asarray(self.ranges, dtype=np.float64)
        sv = np.asarray(self.support_vectors, dtype=np.float64)
        coef = np.asarray(self.coefficients, dtype=np.float64)
        if ranges.shape != (_N_FEATURES, 2):
            raise ValueError(f"expected {_N_FEATURES} feature ranges, got {ranges.shape}")
        if np.any(ranges[:, 0] >= ranges[:, 1]):
            bad = int(np.argmax(ranges[:, 0] >= ranges[:, 1]))
            raise ValueError(f"feature range {bad} has min >= max")
        if sv.ndim != 2 or sv.shape[1] != _N_FEATURES:
            raise ValueError(f"support vectors must be (n, {_N_FEATURES}), got {sv.shape}")
        if coef.shape != (sv.shape[0],):
            raise ValueError(
                f"coefficient count {coef.shape} does not match {sv.shape[0]} support vectors"
            )
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "rho", float(self.rho))
        for name, arr in (("ranges", ranges), ("support_vectors", sv), ("coefficients", coef)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in {name}")
            arr.setflags(write=False)
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "coefficients", coef)

    def scale(self, features: np.ndarray) -> np.ndarray:
        """Map a raw feature vector to [-1, 1] by the stored ranges."""
        x = np.asarray(features, dtype=np.float64)
        if x.shape != (_N_FEATURES,):
            raise ValueError(f"expected {_N_FEATURES} features, got shape {x.shape}")
        lo = self.ranges[:, 0]
        hi = self.ranges[:, 1]
        return -1.0 + 2.0 * (x - lo) / (hi - lo)

    @classmethod
    def loads(cls, text: str) -> "BrisqueModel":
        """Parse the plain-text model format.  See :meth:`dumps`."""
        lines = text.splitlines()
        pos = 0

        def next_line() -> tuple[int, str]:
            nonlocal pos
            while pos < len(lines):
                raw = lines[pos]
                pos += 1
                stripped = raw.strip()
                if stripped and not stripped.startswith("#"):
                    return pos, stripped
            raise SchemaError("unexpected end of model file", len(lines))

        lineno, header = next_line()
        parts = header.split()
        if len(parts) != 2 or parts[0] != _MODEL_MAGIC:
            raise SchemaError(f"not a {_MODEL_MAGIC} file: {header!r}", lineno)
        if parts[1] != str(_MODEL_VERSION):
            raise SchemaError(f"unsupported model version {parts[1]!r}", lineno)

        def keyed_float(key: str) -> float:
            lineno, line = next_line()
            parts = line.split()
            if len(parts) != 2 or parts[0] != key:
                raise SchemaError(f"expected '{key} <value>', got {line!r}", lineno)
            try:
                return float(parts[1])
            except ValueError:
                raise SchemaError(f"bad {key} value {parts[1]!r}", lineno) from None

        gamma = keyed_float("gamma")
        rho = keyed_float("rho")

        lineno, line = next_line()
        parts = line.split()
        if len(parts) != 2 or parts[0] != "ranges":
            raise SchemaError(f"expected 'ranges <count>', got {line!r}", lineno)
        if parts[1] != str(_N_FEATURES):
            raise SchemaError(f"expected {_N_FEATURES} ranges, got {parts[1]}", lineno)
        ranges = np.empty((_N_FEATURES, 2), dtype=np.float64)
        for i in range(_N_FEATURES):
            lineno, line = next_line()
            parts = line.split()
            if len(parts) != 2:
                raise SchemaError(f"range line needs two values, got {line!r}", lineno)
            try:
                ranges[i] = [float(parts[0]), float(parts[1])]
            except ValueError:
                raise SchemaError(f"bad range values {line!r}", lineno) from None

        lineno, line = next_line()
        parts = line.split()
        if len(parts) != 2 or parts[0] != "vectors":
            raise SchemaError(f"expected 'vectors <count>', got {line!r}", lineno)
        try:
            count = int(parts[1])
        except ValueError:
            raise SchemaError(f"bad vector count {parts[1]!r}", lineno) from None
        if count < 1:
            raise SchemaError(f"model needs at least one support vector, got {count}", lineno)
        sv = np.empty((count, _N_FEATURES), dtype=np.float64)
        coef = np.empty(count, dtype=np.float64)
        for i in range(count):
            lineno, line = next_line()
            parts = line.split()
            if len(parts) != 1 + _N_FEATURES:
                raise SchemaError(
                    f"vector line needs {1 + _N_FEATURES} values, got {len(parts)}", lineno
                )
            try:
                coef[i] = float(parts[0])
                sv[i] = [float(p) for p in parts[1:]]
            except ValueError:
                raise SchemaError(f"bad vector values on line {lineno}", lineno) from None
        try:
            return cls(gamma=gamma, rho=rho, ranges=ranges, support_vectors=sv, coefficients=coef)
        except ValueError as exc:
            raise SchemaError(str(exc), lineno) from exc

    @classmethod
    def load(cls, path) -> "BrisqueModel":
        with open(path, "r", encoding="ascii") as fh:
            return cls.loads(fh.read())

    def dumps(self) -> str:
        """Serialise to the plain-text format::

            brisque-svr 1
            gamma <g>
            rho <r>
            ranges 36
            <min> <max>            (36 lines)
            vectors <n>
            <coef> <f_1> ... <f_36> (n lines)

        Blank lines and ``#`` comments are ignored by the parser.
        """
        out = [f"{_MODEL_MAGIC} {_MODEL_VERSION}"]
        out.append(f"gamma {float(self.gamma)!r}")
        out.append(f"rho {float(self.rho)!r}")
        out.append(f"ranges {_N_FEATURES}")
        for lo, hi in self.ranges:
            out.append(f"{float(lo)!r} {float(hi)!r}")
        out.append(f"vectors {self.support_vectors.shape[0]}")
        for c, vec in zip(self.coefficients, self.support_vectors):
            out.append(" ".join([repr(float(c))] + [repr(float(v)) for v in vec]))
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.dumps())


def brisque_score(features: np.ndarray, model: BrisqueModel) -> float:
    """Score a 36-feature vector with an RBF SVR (higher = worse quality)."""
    x = model.scale(features)
    d2 = np.sum((model.support_vectors - x) ** 2, axis=1)
    return float(model.coefficients @ np.exp(-model.gamma * d2) - model.rho)


_default_model: BrisqueModel | None = None


def load_default_model() -> BrisqueModel:
    """The reference SVR model shipped with the package (cached)."""
    global _default_model
    if _default_model is None:
        text = (
            resources.files("antiforensics").joinpath("data/brisque_reference.model").read_text()
        )
        _default_model = BrisqueModel.loads(text)
    return _default_model


# --------------------------------------------------------------------------
# combined records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QualityRecord:
    """Per-image quality measurements.

    Full-reference fields are ``None`` when no reference exists (e.g.
    untouched source rows in a report); ``psnr`` is ``inf`` for
    identical pairs.
    """

    psnr: float | None
    ssim: float | None
    brisque: float | None

    def __post_init__(self) -> None:
        if self.ssim is not None and not (-1.0 <= self.ssim <= 1.0):
            raise ValueError(f"SSIM out of range [-1, 1]: {self.ssim}")
        if self.psnr is not None and math.isnan(self.psnr):
            raise ValueError("PSNR may not be NaN")


def quality_record(
    dist: ImageBuffer,
    ref: ImageBuffer | None = None,
    model: BrisqueModel | None = None,
    *,
    use_luma: bool = False,
) -> QualityRecord:
    """Compute all applicable metrics for one image.

    With no reference only BRISQUE is reported.  ``model`` defaults to
    the shipped reference model.
    """
    if model is None:
        model = load_default_model()
    score = brisque_score(brisque_features(dist), model)
    if ref is None:
        return QualityRecord(psnr=None, ssim=None, brisque=score)
    return QualityRecord(
        psnr=psnr(ref, dist, use_luma=use_luma),
        ssim=ssim(ref, dist, use_luma=use_luma),
        brisque=score,
    )
