import numpy as np
import pytest

from seqsr.bspline import Warp, prefilter
from seqsr.operators import ObservationOp
from seqsr.synthetic import band_limited_texture, degrade, make_synthetic, rotation_fields, translation_fields


class TestTexture:
    def test_range_and_determinism(self):
        a = band_limited_texture((32, 32), seed=5)
        assert a.min() == pytest.approx(30.0) and a.max() == pytest.approx(225.0)
        assert np.array_equal(a, band_limited_texture((32, 32), seed=5))
        assert not np.array_equal(a, band_limited_texture((32, 32), seed=6))

    def test_band_limited(self):
        a = band_limited_texture((64, 64), seed=1, cutoff=0.05)
        power = np.abs(np.fft.fft2(a - a.mean())) ** 2
        f = np.hypot(*np.meshgrid(np.fft.fftfreq(64), np.fft.fftfreq(64)))
        assert power[f > 0.25].sum() < 1e-6 * power.sum()


class TestMotion:
    def test_zero_translation_identical_frames(self):
        frames, d = make_synthetic((16, 16), 3, ("translate", 0.0, 0.0), seed=1)
        assert not np.any(d)
        for t in range(4):
            assert np.abs(frames[t] - frames[0]).max() < 1e-9

    def test_integer_translation_is_roll(self):
        frames, d = make_synthetic((16, 16), 3, ("translate", 1.0, 0.0), seed=1)
        for t in range(4):
            assert np.abs(frames[t] - np.roll(frames[0], t, axis=1)).max() < 1e-9
        assert np.array_equal(d, translation_fields((16, 16), 3, 1.0, 0.0))

    def test_fractional_steps_consistent(self):
        # consecutive frames are related by the per-step field up to spline resampling
        frames, d = make_synthetic((32, 32), 2, ("translate", 0.5, 0.25), seed=2)
        pred = Warp(d[1])(prefilter(frames[2]))
        assert np.abs(pred - frames[1]).max() < 1e-9

    def test_rotation(self):
        frames, d = make_synthetic((16, 16), 2, ("rotate", 0.02), seed=1)
        assert frames.shape == (3, 16, 16) and d.shape == (2, 2, 16, 16)
        assert np.array_equal(d[0], rotation_fields((16, 16), 1, 0.02)[0])
        center = rotation_fields((17, 17), 1, 0.3)[0][:, 8, 8]
        assert np.allclose(center, 0.0)

    def test_unknown_motion(self):
        with pytest.raises(ValueError):
            make_synthetic((8, 8), 1, ("zoom", 2.0))


class TestDegrade:
    def test_noiseless_is_observation(self, rng):
        x = rng.standard_normal((2, 8, 8))
        assert np.array_equal(degrade(x), ObservationOp()(x))

    def test_noise_seeded(self, rng):
        x = np.full((2, 8, 8), 100.0)
        a, b = degrade(x, 2.0, seed=3), degrade(x, 2.0, seed=3)
        assert np.array_equal(a, b)
        assert 1.0 < np.std(a - 100.0) < 3.0
