"""Overlapping sliding-window split/merge for memory-limited restoration.

A :class:`TileGrid` describes window-sized tiles laid out with a fixed stride
(window minus overlap); the final row/column of tiles is clamped so the grid
never runs past the image. Axes shorter than the window get one full-axis
tile. ``merge`` feathers overlap bands with complementary linear ramps —
where exactly two tiles meet, their weights sum to one by construction, and a
final per-pixel normalization keeps the partition exact even where clamping
stacks three or more tiles.

Splitting and merging are pure functions; a grid plus its tile list is all
the state there is, which is what lets tiles travel through worker processes
independently and in any order.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .image import ImageBuffer, quantize_u8

__all__ = ["TileGrid", "plan_tiles", "split", "merge", "pad_to_min", "coverage_counts"]


@dataclasses.dataclass(frozen=True)
class TileGrid:
    """Tile layout: origins are (x, y) pairs in row-major order.

    ``image_dims`` is (width, height). All tiles share one size,
    ``tile_size`` = (min(window, width), min(window, height)).
    """

    window: int
    overlap: int
    tile_origins: tuple
    image_dims: tuple

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if not (0 <= self.overlap < self.window):
            raise ValueError(
                f"need 0 <= overlap < window, got overlap={self.overlap} window={self.window}"
            )
        w, h = self.image_dims
        if w < 1 or h < 1:
            raise ValueError(f"empty image dims {self.image_dims}")
        if not self.tile_origins:
            raise ValueError("grid has no tiles")

    @property
    def tile_size(self):
        """(tile_width, tile_height)."""
        w, h = self.image_dims
        return (min(self.window, w), min(self.window, h))

    @property
    def x_origins(self):
        return tuple(sorted({x for x, _ in self.tile_origins}))

    @property
    def y_origins(self):
        return tuple(sorted({y for _, y in self.tile_origins}))

    def __len__(self):
        return len(self.tile_origins)


def _axis_origins(dim: int, window: int, stride: int):
    if dim <= window:
        return [0]
    origins = [0]
    while origins[-1] + window < dim:
        origins.append(min(origins[-1] + stride, dim - window))
    return origins


def plan_tiles(w: int, h: int, window: int = 256, overlap: int = 32) -> TileGrid:
    """Plan a grid over a w x h image.

    Stride is ``window - overlap``; the last origin on each axis is clamped to
    ``dim - window`` so the grid ends flush with the image. An axis shorter
    than the window collapses to a single full-axis tile.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if not (0 <= overlap < window):
        raise ValueError(f"need 0 <= overlap < window, got overlap={overlap} window={window}")
    stride = window - overlap
    xs = _axis_origins(w, window, stride)
    ys = _axis_origins(h, window, stride)
    origins = tuple((x, y) for y in ys for x in xs)
    return TileGrid(window=window, overlap=overlap, tile_origins=origins, image_dims=(w, h))


def split(img, grid: TileGrid):
    """Cut the image into the grid's tiles (copies, in grid order)."""
    buf = img if isinstance(img, ImageBuffer) else ImageBuffer(np.asarray(img))
    w, h = grid.image_dims
    if (buf.width, buf.height) != (w, h):
        raise ValueError(
            f"image is {buf.width}x{buf.height} but grid was planned for {w}x{h}"
        )
    tw, th = grid.tile_size
    return [
        ImageBuffer(buf.data[y : y + th, x : x + tw, :])
        for x, y in grid.tile_origins
    ]


def _axis_profiles(origins, tile: int):
    """Linear feather profile per origin along one axis.

    Ramps rise over the intersection with the preceding tile and fall over the
    intersection with the following one; where two tiles meet, the up- and
    down-ramps are complementary: (k+1)/(L+1) and (L-k)/(L+1) sum to 1.
    """
    profiles = []
    for i, o in enumerate(origins):
        p = np.ones(tile, dtype=np.float64)
        left = origins[i - 1] + tile - o if i > 0 else 0
        right = o + tile - origins[i + 1] if i < len(origins) - 1 else 0
        left = max(0, min(left, tile))
        right = max(0, min(right, tile))
        if left:
            ramp = (np.arange(left, dtype=np.float64) + 1.0) / (left + 1.0)
            p[:left] = np.minimum(p[:left], ramp)
        if right:
            ramp = np.arange(right, 0, -1, dtype=np.float64) / (right + 1.0)
            p[tile - right :] = np.minimum(p[tile - right :], ramp)
        profiles.append(p)
    return profiles


def merge(tiles, grid: TileGrid) -> ImageBuffer:
    """Reassemble tiles into a full image, feathering the overlap bands.

    Output dtype follows the tiles: all-uint8 tiles give a uint8 image
    (quantized once after blending), anything float stays float. With
    unmodified tiles the round trip through :func:`split` is exact.
    """
    if len(tiles) != len(grid.tile_origins):
        raise ValueError(f"grid expects {len(grid.tile_origins)} tiles, got {len(tiles)}")
    tw, th = grid.tile_size
    arrays = []
    for k, t in enumerate(tiles):
        buf = t if isinstance(t, ImageBuffer) else ImageBuffer(np.asarray(t))
        if (buf.height, buf.width) != (th, tw):
            raise ValueError(
                f"tile {k} is {buf.width}x{buf.height}, grid tile size is {tw}x{th}"
            )
        arrays.append(buf.data)
    channels = {a.shape[2] for a in arrays}
    if len(channels) != 1:
        raise ValueError(f"tiles disagree on channel count: {sorted(channels)}")
    all_u8 = all(a.dtype == np.uint8 for a in arrays)

    w, h = grid.image_dims
    c = arrays[0].shape[2]
    xs, ys = grid.x_origins, grid.y_origins
    px = dict(zip(xs, _axis_profiles(xs, tw)))
    py = dict(zip(ys, _axis_profiles(ys, th)))
    acc = np.zeros((h, w, c), dtype=np.float64)
    wacc = np.zeros((h, w, 1), dtype=np.float64)
    for (x, y), tile in zip(grid.tile_origins, arrays):
        w2d = np.outer(py[y], px[x])[:, :, np.newaxis]
        acc[y : y + th, x : x + tw, :] += w2d * tile.astype(np.float64, copy=False)
        wacc[y : y + th, x : x + tw, :] += w2d
    if not np.all(wacc > 0):
        raise AssertionError("grid does not cover the image; planning bug")
    out = acc / wacc
    return quantize_u8(out) if all_u8 else ImageBuffer(out)


def coverage_counts(grid: TileGrid) -> np.ndarray:
    """(h, w) array counting how many tiles cover each pixel."""
    w, h = grid.image_dims
    tw, th = grid.tile_size
    counts = np.zeros((h, w), dtype=np.int32)
    for x, y in grid.tile_origins:
        counts[y : y + th, x : x + tw] += 1
    return counts


def pad_to_min(arr: np.ndarray, min_h: int, min_w: int):
    """Reflect-pad an (H, W, C) array up to at least min_h x min_w.

    Returns (padded, (pad_bottom, pad_right)); cropping those pads off the
    result undoes it. Reflection is applied in passes so even images much
    smaller than the target pad cleanly (each pass mirrors at most dim-1
    pixels).
    """
    out = np.asarray(arr)
    while out.shape[0] < min_h or out.shape[1] < min_w:
        grow_h = min(max(min_h - out.shape[0], 0), out.shape[0] - 1)
        grow_w = min(max(min_w - out.shape[1], 0), out.shape[1] - 1)
        if grow_h == 0 and grow_w == 0:
            raise ValueError(f"cannot reflect-pad a 1-pixel axis up to {min_h}x{min_w}")
        out = np.pad(out, ((0, grow_h), (0, grow_w), (0, 0)), mode="reflect")
    pad_b = out.shape[0] - arr.shape[0]
    pad_r = out.shape[1] - arr.shape[1]
    return out, (pad_b, pad_r)
