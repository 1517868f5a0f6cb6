"""Shared fixtures: a small corpus of natural photographs.

The corpus is built from scikit-image's bundled sample photos (pristine,
PNG-sourced content only) and cut into fixed-size crops. Everything is
deterministic: same photos, same crop grid, every run.
"""

import numpy as np
import pytest

CROP = 192

# PNG-sourced sample photos (no JPEG artifacts) and how many crops to take
# from each. Grayscale photos are replicated to three channels so the corpus
# exercises the RGB path throughout. Only photos bundled with scikit-image are
# used (no network fetches).
_PHOTO_PLAN = [
    ("astronaut", 4),
    ("coffee", 3),
    ("chelsea", 1),
    ("motorcycle_left", 4),
    ("motorcycle_right", 2),
    ("camera", 3),
    ("moon", 2),
    ("ihc", 1),
]


def _fetch(data, name):
    if name == "motorcycle_left":
        return data.stereo_motorcycle()[0]
    if name == "motorcycle_right":
        return data.stereo_motorcycle()[1]
    if name == "ihc":
        return data.immunohistochemistry()
    return getattr(data, name)()


def _as_rgb(arr):
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    return arr[:, :, :3].astype(np.uint8)


def _crops(arr, count, size=CROP):
    """Non-overlapping size x size crops in raster order, up to `count`."""
    h, w = arr.shape[:2]
    out = []
    for top in range(0, h - size + 1, size):
        for left in range(0, w - size + 1, size):
            out.append(arr[top:top + size, left:left + size].copy())
            if len(out) == count:
                return out
    return out


@pytest.fixture(scope="session")
def natural_photos():
    """list of (name, uint8 RGB array) full-size sample photos."""
    data = pytest.importorskip("skimage.data")
    photos = []
    for name, _ in _PHOTO_PLAN:
        photos.append((name, _as_rgb(_fetch(data, name))))
    return photos


@pytest.fixture(scope="session")
def corpus20(natural_photos):
    """At least 20 natural RGB crops of CROP x CROP, named for debuggability."""
    crops = []
    for (name, arr), (_, count) in zip(natural_photos, _PHOTO_PLAN):
        for i, c in enumerate(_crops(arr, count)):
            crops.append((f"{name}_{i}", c))
    assert len(crops) >= 20, "corpus construction shrank; adjust _PHOTO_PLAN"
    return crops


@pytest.fixture(scope="session")
def small_photos(natural_photos):
    """Ten 96x96 crops for tests where runtime matters more than realism."""
    crops = []
    for name, arr in natural_photos:
        for i, c in enumerate(_crops(arr, 2, size=96)):
            crops.append((f"{name}_s{i}", c))
    return crops[:10]
