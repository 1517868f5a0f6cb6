#!/usr/bin/env python3
"""Generate the BRISQUE reference model shipped with the package.

The scaling ranges and the kernel/regression constants (gamma, rho)
come from the published LIVE-trained release of the original BRISQUE
regressor.  The support vectors of that release are not redistributable
through this repository's toolchain, so the shipped model uses a
distance-to-natural surrogate instead: the support vectors are feature
vectors of pristine photographs (scikit-image sample data), all with
the same negative coefficient, which makes the score a monotone
function of distance to the natural anchors.  The coefficient and an
offset correction are calibrated so that held-out pristine crops score
around 15 and heavily noised crops around 55, matching the ballpark of
the original scorer.

Scores from this surrogate are comparable with each other (ordering,
degradation direction) but not numerically interchangeable with the
LIVE release.  To use the original model, convert it with
``tools/convert_live_svm.py``.

Run from the repository root:

    python3 tools/make_brisque_reference.py
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from antiforensics.image import ImageBuffer  # noqa: E402
from antiforensics.iqa import BrisqueModel, brisque_features, brisque_score  # noqa: E402
from antiforensics.transforms import add_gaussian_noise  # noqa: E402

# Per-feature (min, max) scaling ranges of the LIVE-trained release.
LIVE_RANGES = [
    (0.338, 10.0), (0.017204, 0.806612), (0.236, 1.642),
    (-0.123884, 0.20293), (0.000155, 0.712298), (0.001122, 0.470257),
    (0.244, 1.641), (-0.123586, 0.179083), (0.000152, 0.710456),
    (0.000975, 0.470984), (0.249, 1.555), (-0.135687, 0.100858),
    (0.000174, 0.684173), (0.000913, 0.534174), (0.258, 1.561),
    (-0.143408, 0.100486), (0.000179, 0.685696), (0.000888, 0.536508),
    (0.471, 3.264), (0.012809, 0.703171), (0.218, 1.046),
    (-0.094876, 0.187459), (1.5e-05, 0.442057), (0.001272, 0.40803),
    (0.222, 1.042), (-0.115772, 0.162604), (1.6e-05, 0.444362),
    (0.001374, 0.40243), (0.227, 0.996), (-0.117188, 0.098323),
    (3e-05, 0.531903), (0.001122, 0.369589), (0.228, 0.99),
    (-0.12243, 0.098658), (2.8e-05, 0.530092), (0.001118, 0.370399),
]
LIVE_GAMMA = 0.05
LIVE_RHO = -153.591

TARGET_PRISTINE = 15.0
TARGET_NOISED = 55.0


def _photos():
    from skimage import data

    mcycle = data.stereo_motorcycle()
    images = [
        data.astronaut(),
        data.coffee(),
        data.chelsea(),
        mcycle[0],
        mcycle[1],
        data.camera(),
        data.moon(),
        data.immunohistochemistry(),
    ]
    out = []
    for arr in images:
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        out.append(np.ascontiguousarray(arr[:, :, :3]))
    return out


def _anchor_crops(photos):
    """Full frames plus a few 256x256 corner crops for diversity."""
    crops = [p for p in photos]
    for p in photos:
        h, w = p.shape[:2]
        if h >= 256 and w >= 256:
            crops.append(p[:256, :256])
            crops.append(p[h - 256 :, w - 256 :])
    return crops


def _holdout_crops(photos):
    """Centre 192x192 crops, disjoint in position from the anchor corners."""
    out = []
    for p in photos:
        h, w = p.shape[:2]
        if h >= 192 and w >= 192:
            y = (h - 192) // 2
            x = (w - 192) // 2
            out.append(p[y : y + 192, x : x + 192])
    return out


def main() -> None:
    rng_seed = 1207
    photos = _photos()

    anchors = np.stack(
        [brisque_features(ImageBuffer(c)) for c in _anchor_crops(photos)]
    )
    print(f"{anchors.shape[0]} anchor vectors")

    holdout = _holdout_crops(photos)
    clean_feats = [brisque_features(ImageBuffer(c)) for c in holdout]
    noised_feats = [
        brisque_features(add_gaussian_noise(ImageBuffer(c), 25.0, rng_seed + i))
        for i, c in enumerate(holdout)
    ]

    ranges = np.asarray(LIVE_RANGES, dtype=np.float64)
    lo, hi = ranges[:, 0], ranges[:, 1]

    def scaled(f):
        return -1.0 + 2.0 * (f - lo) / (hi - lo)

    sv = np.stack([scaled(a) for a in anchors])

    def kernel_sum(f):
        d2 = np.sum((sv - scaled(f)) ** 2, axis=1)
        return float(np.sum(np.exp(-LIVE_GAMMA * d2)))

    s_clean = np.array([kernel_sum(f) for f in clean_feats])
    s_noise = np.array([kernel_sum(f) for f in noised_feats])
    print(f"kernel sums: clean {s_clean.mean():.3f}  noised {s_noise.mean():.3f}")
    assert s_clean.mean() > s_noise.mean(), "anchors do not separate noise"

    # score = -c * S(x) - rho ; solve for c > 0 and rho from the two targets
    c = (TARGET_NOISED - TARGET_PRISTINE) / (s_clean.mean() - s_noise.mean())
    rho = -TARGET_PRISTINE - c * s_clean.mean()
    coefficients = np.full(sv.shape[0], -c)

    model = BrisqueModel(
        gamma=LIVE_GAMMA,
        rho=rho,
        ranges=ranges,
        support_vectors=sv,
        coefficients=coefficients,
    )

    clean_scores = [brisque_score(f, model) for f in clean_feats]
    noise_scores = [brisque_score(f, model) for f in noised_feats]
    print("clean scores :", " ".join(f"{s:6.2f}" for s in clean_scores))
    print("noised scores:", " ".join(f"{s:6.2f}" for s in noise_scores))
    worst = min(n - c0 for n, c0 in zip(noise_scores, clean_scores))
    print(f"smallest noised-minus-clean margin: {worst:.2f}")
    assert worst > 0, "ordering violated on a holdout image"

    dest = (
        pathlib.Path(__file__).resolve().parents[1]
        / "src" / "antiforensics" / "data" / "brisque_reference.model"
    )
    model.save(dest)
    print(f"wrote {dest} ({dest.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
