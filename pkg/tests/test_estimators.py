import numpy as np
import pytest

from antiforensics.estimators import (
    BlurSharp,
    DownscaleUpscale,
    DownsizeUpsize,
    JpegCar,
    NoiseDenoise,
)
from antiforensics.image import ImageBuffer
from antiforensics.pipelines import PipelineSpec, run_pipeline

ALL_TRANSFORMERS = [BlurSharp, DownsizeUpsize, JpegCar, NoiseDenoise, DownscaleUpscale]


def _img(seed=0, h=64, w=64):
    rng = np.random.default_rng(seed)
    return ImageBuffer(rng.integers(0, 256, (h, w, 3)).astype(np.uint8))


class TestEstimatorSurface:
    @pytest.mark.parametrize("cls", ALL_TRANSFORMERS)
    def test_get_set_params_round_trip(self, cls):
        est = cls()
        params = est.get_params()
        est.set_params(**params)
        assert est.get_params() == params

    def test_get_params_contents(self):
        est = NoiseDenoise(sigma=25.0, seed=9)
        assert est.get_params() == {"sigma": 25.0, "seed": 9, "worker": None}

    def test_set_params_rejects_unknown(self):
        with pytest.raises(ValueError, match="invalid parameter"):
            JpegCar().set_params(gamma=1)

    def test_set_params_returns_self(self):
        est = JpegCar()
        assert est.set_params(quality=70) is est
        assert est.quality == 70

    @pytest.mark.parametrize("cls", ALL_TRANSFORMERS)
    def test_fit_returns_self(self, cls):
        est = cls()
        assert est.fit(_img()) is est
        assert est.fitted_

    def test_repr_shows_params(self):
        assert "quality=70" in repr(JpegCar(quality=70))

    def test_fit_validates_params(self):
        with pytest.raises(ValueError, match="1..100"):
            JpegCar(quality=0).fit(_img())

    def test_fit_validates_input(self):
        with pytest.raises(ValueError):
            BlurSharp().fit(np.zeros((4, 4, 7)))


class TestTransformSemantics:
    def test_matches_run_pipeline(self):
        img = _img(1)
        assert BlurSharp().transform(img) == run_pipeline(img, PipelineSpec("blur-sharp"))

    def test_list_in_list_out(self):
        imgs = [_img(2), _img(3)]
        outs = DownsizeUpsize().fit(imgs).transform(imgs)
        assert isinstance(outs, list) and len(outs) == 2
        assert all((o.height, o.width) == (64, 64) for o in outs)

    def test_ndarray_input_accepted(self):
        arr = np.random.default_rng(4).integers(0, 256, (48, 48, 3)).astype(np.uint8)
        out = BlurSharp().transform(arr)
        assert isinstance(out, ImageBuffer)

    def test_jpeg_car_quality_param_effective(self):
        img = _img(5)
        low = JpegCar(quality=10).transform(img)
        high = JpegCar(quality=95).transform(img)
        diff_low = np.abs(low.data.astype(int) - img.data.astype(int)).mean()
        diff_high = np.abs(high.data.astype(int) - img.data.astype(int)).mean()
        assert diff_low > diff_high

    def test_noise_denoise_seed_determinism(self):
        img = _img(6)
        a = NoiseDenoise(sigma=25, seed=5).transform(img)
        b = NoiseDenoise(sigma=25, seed=5).transform(img)
        c = NoiseDenoise(sigma=25, seed=6).transform(img)
        assert a == b and a != c

    def test_fit_transform(self):
        img = _img(7)
        assert BlurSharp().fit_transform(img) == BlurSharp().transform(img)

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_downscale_upscale_dims(self):
        img = _img(8, 70, 50)
        out = DownscaleUpscale().transform(img)
        assert (out.height, out.width) == (70, 50)
