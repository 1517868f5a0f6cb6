import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antiforensics.image import ImageBuffer
from antiforensics.tiling import (
    TileGrid,
    coverage_counts,
    merge,
    pad_to_min,
    plan_tiles,
    split,
)
from antiforensics.tiling import _axis_profiles


class TestPlanTiles:
    def test_single_tile_when_exact_fit(self):
        grid = plan_tiles(256, 256, window=256, overlap=32)
        assert grid.tile_origins == ((0, 0),)

    def test_clamped_last_origin(self):
        grid = plan_tiles(300, 256, window=256, overlap=32)
        assert grid.x_origins == (0, 44)  # stride 224, last clamped to 300-256
        assert grid.y_origins == (0,)
        assert grid.tile_origins == ((0, 0), (44, 0))

    def test_small_image_single_full_tile(self):
        grid = plan_tiles(100, 100, window=256, overlap=32)
        assert grid.tile_origins == ((0, 0),)
        assert grid.tile_size == (100, 100)

    def test_overlap_must_be_smaller_than_window(self):
        with pytest.raises(ValueError):
            plan_tiles(512, 512, window=256, overlap=256)
        with pytest.raises(ValueError):
            plan_tiles(512, 512, window=256, overlap=-1)

    def test_row_major_order_and_stride(self):
        grid = plan_tiles(512, 512, window=256, overlap=32)
        assert grid.x_origins == (0, 224, 256)
        assert grid.tile_origins[0:3] == ((0, 0), (224, 0), (256, 0))

    def test_coverage_counts(self):
        grid = plan_tiles(300, 300, window=256, overlap=32)
        counts = coverage_counts(grid)
        assert counts.min() >= 1
        # pixels outside any overlap band are covered exactly once
        assert counts[0, 0] == 1
        assert counts[299, 299] == 1
        # the clamped band is covered twice
        assert counts[0, 100] == 2


class TestSplitMerge:
    def test_roundtrip_identity_uint8(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(300, 512, 3), dtype=np.uint8)
        grid = plan_tiles(512, 300, window=256, overlap=32)
        tiles = split(img, grid)
        assert np.array_equal(merge(tiles, grid).data, img)

    def test_roundtrip_identity_float_close(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 255, size=(120, 200, 1))
        grid = plan_tiles(200, 120, window=64, overlap=16)
        out = merge(split(ImageBuffer(img), grid), grid)
        assert out.is_float
        assert np.allclose(out.data, img, atol=1e-9)

    def test_two_constant_tiles_blend_linearly(self):
        # 480x64 image, window 256, overlap 32: tiles at x=0 and x=224
        grid = plan_tiles(480, 64, window=256, overlap=32)
        assert grid.x_origins == (0, 224)
        t1 = ImageBuffer(np.full((64, 256, 1), 100.0))
        t2 = ImageBuffer(np.full((64, 256, 1), 200.0))
        out = merge([t1, t2], grid).data[:, :, 0]
        band = out[0, 224:256]
        # ramp (k+1)/(33): blended = 100 + 100*(k+1)/33
        expect = 100.0 + 100.0 * (np.arange(32) + 1) / 33.0
        assert np.allclose(band, expect, atol=1e-9)
        assert np.all(out[:, :224] == 100.0)
        assert np.all(out[:, 256:] == 200.0)

    def test_zero_overlap_is_concatenation(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, size=(128, 128, 3), dtype=np.uint8)
        grid = plan_tiles(128, 128, window=64, overlap=0)
        tiles = split(img, grid)
        assert len(tiles) == 4
        assert np.array_equal(merge(tiles, grid).data, img)

    def test_feather_weights_complementary(self):
        profiles = _axis_profiles([0, 224], 256)
        band_sum = profiles[0][224:] + profiles[1][: 256 - 224]
        assert np.allclose(band_sum, 1.0, atol=0)  # exact by construction

    def test_geometry_mismatches_raise(self):
        grid = plan_tiles(100, 100, window=64, overlap=16)
        tiles = split(np.zeros((100, 100, 1), np.uint8), grid)
        with pytest.raises(ValueError, match="tiles"):
            merge(tiles[:-1], grid)
        bad = [ImageBuffer(np.zeros((10, 10, 1), np.uint8))] * len(tiles)
        with pytest.raises(ValueError, match="tile 0"):
            merge(bad, grid)
        with pytest.raises(ValueError, match="planned for"):
            split(np.zeros((64, 64, 1), np.uint8), grid)

    @given(
        w=st.integers(20, 300),
        h=st.integers(20, 300),
        window=st.integers(16, 128),
        data=st.data(),
    )
    @settings(max_examples=30, deadline=None)
    def test_roundtrip_identity_random_geometry(self, w, h, window, data):
        overlap = data.draw(st.integers(0, window - 1))
        rng = np.random.default_rng(w * 1000 + h)
        img = rng.integers(0, 256, size=(h, w, 1), dtype=np.uint8)
        grid = plan_tiles(w, h, window=window, overlap=overlap)
        tiles = split(img, grid)
        assert np.array_equal(merge(tiles, grid).data, img)
        assert coverage_counts(grid).min() >= 1

    def test_weights_partition_of_unity(self):
        # all-ones float tiles must merge to exactly-normalized ones
        for w, h, window, overlap in [(640, 480, 256, 32), (1000, 30, 96, 95), (77, 77, 16, 7)]:
            grid = plan_tiles(w, h, window=window, overlap=overlap)
            tw, th = grid.tile_size
            tiles = [ImageBuffer(np.ones((th, tw, 1)))] * len(grid)
            out = merge(tiles, grid).data
            assert np.allclose(out, 1.0, atol=1e-12)


class TestPadToMin:
    def test_no_pad_needed(self):
        arr = np.zeros((50, 60, 3), np.uint8)
        out, pads = pad_to_min(arr, 32, 32)
        assert out.shape == arr.shape and pads == (0, 0)

    def test_reflect_pad_and_undo(self):
        rng = np.random.default_rng(4)
        arr = rng.integers(0, 256, size=(10, 12, 3), dtype=np.uint8)
        out, (pb, pr) = pad_to_min(arr, 48, 40)
        assert out.shape[0] >= 48 and out.shape[1] >= 40
        assert np.array_equal(out[: arr.shape[0], : arr.shape[1]], arr)
        assert (pb, pr) == (out.shape[0] - 10, out.shape[1] - 12)
        # first reflected row mirrors row -2 (reflect-101)
        assert np.array_equal(out[10, :12], arr[8])

    def test_one_pixel_axis_rejected(self):
        with pytest.raises(ValueError):
            pad_to_min(np.zeros((1, 5, 1), np.uint8), 8, 8)
