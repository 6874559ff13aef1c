import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqsr.metrics import cc, crop, mbae, mepe, psnr, psnr_sequence


def naive_psnr(a, b, standard=False):
    a, b = np.ravel(a), np.ravel(b)
    sq, peak = 0.0, 0.0
    for u, v in zip(a, b):
        sq += (u - v) ** 2
        peak = max(peak, abs(u))
    scale = math.sqrt(len(a)) if standard else len(a)
    return 20 * math.log10(scale * peak / math.sqrt(sq))


def naive_cc(a, b):
    a, b = list(np.ravel(a)), list(np.ravel(b))
    ma, mb = sum(a) / len(a), sum(b) / len(b)
    num = sum((u - ma) * (v - mb) for u, v in zip(a, b))
    da = math.sqrt(sum((u - ma) ** 2 for u in a))
    db = math.sqrt(sum((v - mb) ** 2 for v in b))
    return num / (da * db)


def naive_mepe(dt, dh):
    T, _, H, W = dt.shape
    total = 0.0
    for t in range(T):
        for i in range(H):
            for j in range(W):
                total += abs(dt[t, 0, i, j] - dh[t, 0, i, j]) + abs(dt[t, 1, i, j] - dh[t, 1, i, j])
    return total / (H * W * T)


def naive_mbae(dt, dh):
    T, _, H, W = dt.shape
    total = 0.0
    for t in range(T):
        for i in range(H):
            for j in range(W):
                u, v = dt[t, 0, i, j], dt[t, 1, i, j]
                p, q = dh[t, 0, i, j], dh[t, 1, i, j]
                cos = (1 + u * p + v * q) / math.sqrt((1 + u * u + v * v) * (1 + p * p + q * q))
                total += math.acos(max(-1.0, min(1.0, cos)))
    return math.degrees(total / (T * H * W))


class TestPsnr:
    def test_worked_example(self):
        a = np.array([10.0, 10.0, 10.0, 10.0])
        b = np.array([10.0, 10.0, 10.0, 8.0])
        assert psnr(a, b) == pytest.approx(20 * math.log10(4 * 10 / 2), abs=1e-12)
        assert round(psnr(a, b), 4) == 26.0206
        assert psnr(a, b, standard=True) == pytest.approx(20.0, abs=1e-12)

    def test_identical_is_inf(self, rng):
        a = rng.standard_normal((4, 4))
        assert psnr(a, a) == math.inf

    @pytest.mark.parametrize("standard", [False, True])
    def test_naive_oracle(self, rng, standard):
        a, b = rng.uniform(0, 255, (2, 8, 8))
        assert abs(psnr(a, b, standard) - naive_psnr(a, b, standard)) <= 1e-10

    def test_sequence(self, rng):
        a, b = rng.standard_normal((2, 3, 4, 4))
        assert np.allclose(psnr_sequence(a, b), [psnr(a[t], b[t]) for t in range(3)])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros(4), np.zeros(5))


class TestCorrelation:
    def test_affine_invariance(self, rng):
        a = rng.standard_normal((6, 6))
        assert cc(a, 3.0 * a + 7.0) == pytest.approx(1.0, abs=1e-12)
        assert cc(a, -a) == pytest.approx(-1.0, abs=1e-12)

    def test_constant_is_nan(self, rng):
        assert math.isnan(cc(np.ones((3, 3)), rng.standard_normal((3, 3))))

    def test_naive_oracle(self, rng):
        a, b = rng.standard_normal((2, 7, 5))
        assert abs(cc(a, b) - naive_cc(a, b)) <= 1e-10

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_bounded(self, seed):
        a, b = np.random.default_rng(seed).standard_normal((2, 10))
        assert -1.0 <= cc(a, b) <= 1.0


class TestMotionErrors:
    def test_mepe_examples(self, rng):
        d = rng.standard_normal((2, 2, 4, 4))
        assert mepe(d, d) == 0.0
        shifted = d.copy()
        shifted[:, 0] += 1.0
        assert mepe(d, shifted) == pytest.approx(1.0, abs=1e-15)

    def test_mbae_examples(self, rng):
        d = rng.standard_normal((2, 2, 4, 4))
        assert mbae(d, d) == pytest.approx(0.0, abs=1e-6)
        t, h = np.zeros((1, 2, 1, 1)), np.zeros((1, 2, 1, 1))
        h[0, 0] = 1.0
        assert mbae(t, h) == pytest.approx(45.0, abs=1e-12)

    def test_naive_oracles(self, rng):
        a, b = rng.standard_normal((2, 3, 2, 5, 4))
        assert abs(mepe(a, b) - naive_mepe(a, b)) <= 1e-10
        assert abs(mbae(a, b) - naive_mbae(a, b)) <= 1e-10

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            mepe(np.zeros((2, 3, 4, 4)), np.zeros((2, 3, 4, 4)))
        with pytest.raises(ValueError):
            mbae(np.zeros((2, 4, 4)), np.zeros((2, 4, 4)))


class TestCrop:
    def test_central_window(self):
        a = np.arange(36.0).reshape(6, 6)
        assert np.array_equal(crop(a, 2, 2), [[14, 15], [20, 21]])
        assert crop(np.zeros((3, 2, 8, 6)), 4, 2).shape == (3, 2, 2, 4)

    def test_too_large(self):
        with pytest.raises(ValueError):
            crop(np.zeros((4, 4)), 5, 2)
