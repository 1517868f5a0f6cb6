import json
import sys

import numpy as np
import pytest

from antiforensics.errors import WorkerError
from antiforensics.image import ImageBuffer, load_png, quantize_u8, save_png
from antiforensics.jpegcodec import JpegConfig, decode_jpeg, encode_jpeg
from antiforensics.pipelines import (
    CORRUPTION_ONLY_SUFFIX,
    PipelineSpec,
    derive_seed,
    run_batch,
    run_pipeline,
    write_report,
)
from antiforensics.transforms import ResizeSpec, add_gaussian_noise, blur5, resize, sharpen3

STUB = f"{sys.executable} -m antiforensics.workerstub"


def _img(seed, h=96, w=96):
    rng = np.random.default_rng(seed)
    return ImageBuffer(rng.integers(0, 256, (h, w, 3)).astype(np.uint8))


class TestPipelineSpec:
    def test_unknown_method(self):
        with pytest.raises(ValueError, match="unknown method"):
            PipelineSpec("median-filter")

    def test_quality_only_for_jpeg_car(self):
        with pytest.raises(ValueError, match="quality"):
            PipelineSpec("blur-sharp", quality=50)
        assert PipelineSpec("jpeg-car").quality == 50
        assert PipelineSpec("jpeg-car", quality=70).quality == 70

    def test_sigma_only_for_noise_denoise(self):
        with pytest.raises(ValueError, match="sigma"):
            PipelineSpec("jpeg-car", sigma=15)
        assert PipelineSpec("noise-denoise").sigma == 15.0
        assert PipelineSpec("noise-denoise", sigma=25).sigma == 25.0

    def test_quality_range(self):
        with pytest.raises(ValueError, match="1..100"):
            PipelineSpec("jpeg-car", quality=0)

    def test_negative_sigma(self):
        with pytest.raises(ValueError, match="non-negative"):
            PipelineSpec("noise-denoise", sigma=-1)

    def test_seed_masked_to_64_bits(self):
        assert PipelineSpec("blur-sharp", seed=-1).seed == 2**64 - 1
        assert PipelineSpec("blur-sharp", seed=2**64 + 5).seed == 5


class TestDeriveSeed:
    def test_deterministic_and_name_sensitive(self):
        assert derive_seed(7, "a.png") == derive_seed(7, "a.png")
        assert derive_seed(7, "a.png") != derive_seed(7, "b.png")

    def test_xor_structure(self):
        base = derive_seed(0, "x.png")
        assert derive_seed(12345, "x.png") == base ^ 12345

    def test_range(self):
        assert 0 <= derive_seed(2**64 - 1, "y.png") < 2**64


class TestClassicalMethods:
    def test_blur_sharp_constant_fixed_point(self):
        const = ImageBuffer(np.full((40, 40, 3), 120, dtype=np.uint8))
        out = run_pipeline(const, PipelineSpec("blur-sharp"))
        assert out == const

    def test_blur_sharp_composition(self):
        img = _img(1)
        want = sharpen3(blur5(img))
        assert run_pipeline(img, PipelineSpec("blur-sharp")) == want

    def test_downsize_upsize_400(self):
        img = _img(2, 400, 400)
        out = run_pipeline(img, PipelineSpec("downsize-upsize"))
        assert (out.height, out.width) == (400, 400)
        small = resize(img, ResizeSpec(200, 300, "lanczos4"))
        assert out == resize(small, ResizeSpec(400, 400, "cubic"))

    def test_downsize_upsize_odd_dims(self):
        img = _img(3, 101, 51)
        out = run_pipeline(img, PipelineSpec("downsize-upsize"))
        assert (out.height, out.width) == (101, 51)

    def test_downsize_upsize_too_small(self):
        img = _img(4, 4, 1)
        with pytest.raises(ValueError, match="too small"):
            run_pipeline(img, PipelineSpec("downsize-upsize"))


class TestCorruptionOnlyFallbacks:
    def test_jpeg_car_without_worker_is_codec_round_trip(self):
        img = _img(5)
        out = run_pipeline(img, PipelineSpec("jpeg-car", quality=70))
        want = decode_jpeg(encode_jpeg(img, JpegConfig(quality=70)))
        assert out == want

    def test_noise_denoise_without_worker_is_noised(self):
        img = _img(6)
        out = run_pipeline(img, PipelineSpec("noise-denoise", sigma=25, seed=11))
        want = quantize_u8(add_gaussian_noise(img, 25.0, PipelineSpec("noise-denoise", seed=11).seed))
        assert out == want

    def test_downscale_upscale_without_worker(self):
        img = _img(7, 500, 440)
        out = run_pipeline(img, PipelineSpec("downscale-upscale"))
        assert (out.height, out.width) == (500, 440)

    def test_downscale_upscale_small_image_warns(self):
        img = _img(8, 100, 100)
        with pytest.warns(UserWarning, match="poor"):
            out = run_pipeline(img, PipelineSpec("downscale-upscale"))
        assert (out.height, out.width) == (100, 100)


@pytest.mark.filterwarnings("ignore::UserWarning")
class TestWorkerMethods:
    def test_dimension_preservation_all_methods(self):
        img = _img(9, 97, 64)
        for method in ("blur-sharp", "downsize-upsize", "jpeg-car", "noise-denoise", "downscale-upscale"):
            out = run_pipeline(img, PipelineSpec(method, worker=STUB))
            assert (out.height, out.width) == (97, 64), method
            assert not out.is_float

    def test_noise_denoise_sigma_zero_identity_worker(self):
        img = _img(10)
        out = run_pipeline(img, PipelineSpec("noise-denoise", sigma=0, worker=STUB))
        assert out == img

    def test_noise_denoise_tiled_multi_tile(self):
        img = _img(11, 300, 280)
        spec = PipelineSpec("noise-denoise", sigma=0, worker=STUB)
        assert run_pipeline(img, spec) == img  # identity denoiser, exact merge

    def test_jpeg_car_with_identity_worker(self):
        img = _img(12)
        out = run_pipeline(img, PipelineSpec("jpeg-car", quality=50, worker=STUB))
        want = decode_jpeg(encode_jpeg(img, JpegConfig(quality=50)))
        assert out == want

    def test_downscale_upscale_stub_matches_nearest(self):
        img = _img(13, 440, 420)
        with_worker = run_pipeline(img, PipelineSpec("downscale-upscale", worker=STUB))
        fallback = run_pipeline(img, PipelineSpec("downscale-upscale"))
        assert with_worker == fallback  # stub upscaler is nearest-neighbour x2

    def test_worker_failure_propagates(self):
        img = _img(14)
        spec = PipelineSpec("jpeg-car", worker=STUB + " --fail-task fbcnn")
        with pytest.raises(WorkerError, match="injected"):
            run_pipeline(img, spec)

    def test_determinism_with_worker(self):
        img = _img(15)
        spec = PipelineSpec("noise-denoise", sigma=15, seed=3, worker=STUB)
        assert run_pipeline(img, spec) == run_pipeline(img, spec)


class TestRunBatch:
    def _populate(self, directory, n=3, size=64):
        directory.mkdir(exist_ok=True)
        for i in range(n):
            save_png(_img(100 + i, size, size), directory / f"img{i}.png")

    def test_empty_dir(self, tmp_path):
        (tmp_path / "in").mkdir()
        report = run_batch(tmp_path / "in", tmp_path / "out", PipelineSpec("blur-sharp"))
        assert report["results"] == []
        assert report["counts"] == {"ok": 0, "failed": 0}

    def test_partial_failure_continues(self, tmp_path):
        self._populate(tmp_path / "in", 2)
        (tmp_path / "in" / "broken.png").write_bytes(b"not a png at all")
        report = run_batch(tmp_path / "in", tmp_path / "out", PipelineSpec("blur-sharp"))
        assert report["counts"] == {"ok": 2, "failed": 1}
        by_name = {r["name"]: r for r in report["results"]}
        assert by_name["broken.png"]["status"] == "error"
        assert "MalformedImageError" in by_name["broken.png"]["error"]

    def test_deterministic_outputs(self, tmp_path):
        self._populate(tmp_path / "in")
        spec = PipelineSpec("noise-denoise", sigma=25, seed=42)
        run_batch(tmp_path / "in", tmp_path / "out1", spec)
        run_batch(tmp_path / "in", tmp_path / "out2", spec)
        for p in sorted((tmp_path / "out1").iterdir()):
            q = tmp_path / "out2" / p.name
            assert p.read_bytes() == q.read_bytes(), p.name

    def test_per_image_seeds_decorrelate(self, tmp_path):
        img = _img(200)
        (tmp_path / "in").mkdir()
        save_png(img, tmp_path / "in" / "one.png")
        save_png(img, tmp_path / "in" / "two.png")
        run_batch(
            tmp_path / "in",
            tmp_path / "out",
            PipelineSpec("noise-denoise", sigma=25, seed=0),
        )
        a = load_png(tmp_path / "out" / f"one{CORRUPTION_ONLY_SUFFIX}.png")
        b = load_png(tmp_path / "out" / f"two{CORRUPTION_ONLY_SUFFIX}.png")
        assert a != b

    def test_jpeg_inputs_accepted(self, tmp_path):
        (tmp_path / "in").mkdir()
        img = _img(201)
        (tmp_path / "in" / "photo.jpg").write_bytes(encode_jpeg(img, JpegConfig(quality=90)))
        report = run_batch(tmp_path / "in", tmp_path / "out", PipelineSpec("blur-sharp"))
        assert report["counts"]["ok"] == 1
        assert (tmp_path / "out" / "photo.png").exists()

    def test_corruption_only_suffix(self, tmp_path):
        self._populate(tmp_path / "in", 1)
        report = run_batch(tmp_path / "in", tmp_path / "out", PipelineSpec("jpeg-car"))
        assert report["corruption_only"] is True
        assert (tmp_path / "out" / f"img0{CORRUPTION_ONLY_SUFFIX}.png").exists()

    def test_no_suffix_with_worker(self, tmp_path):
        self._populate(tmp_path / "in", 1)
        report = run_batch(
            tmp_path / "in", tmp_path / "out", PipelineSpec("jpeg-car", worker=STUB)
        )
        assert report["corruption_only"] is False
        assert (tmp_path / "out" / "img0.png").exists()

    def test_parallel_equals_serial(self, tmp_path):
        self._populate(tmp_path / "in", 4)
        spec = PipelineSpec("blur-sharp")
        run_batch(tmp_path / "in", tmp_path / "serial", spec, parallelism=1)
        run_batch(tmp_path / "in", tmp_path / "parallel", spec, parallelism=3)
        for p in sorted((tmp_path / "serial").iterdir()):
            assert p.read_bytes() == (tmp_path / "parallel" / p.name).read_bytes()

    def test_report_round_trips_as_json(self, tmp_path):
        self._populate(tmp_path / "in", 2)
        report = run_batch(tmp_path / "in", tmp_path / "out", PipelineSpec("blur-sharp"))
        dest = tmp_path / "report.json"
        write_report(report, dest)
        loaded = json.loads(dest.read_text())
        assert loaded["counts"] == {"ok": 2, "failed": 0}
        assert loaded["params"]["method"] == "blur-sharp"

    def test_missing_input_dir(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            run_batch(tmp_path / "absent", tmp_path / "out", PipelineSpec("blur-sharp"))

    def test_bad_parallelism(self, tmp_path):
        (tmp_path / "in").mkdir()
        with pytest.raises(ValueError, match="parallelism"):
            run_batch(tmp_path / "in", tmp_path / "out", PipelineSpec("blur-sharp"), 0)
