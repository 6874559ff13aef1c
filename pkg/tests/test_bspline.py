import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqsr.bspline import Warp, bspline3, prefilter, warp, warp_adjoint_image, warp_jacobian_motion_apply
from seqsr.oracles import dense_warp


def _interp_system(n):
    """Periodic sampled cubic B-spline matrix built entry by entry."""
    B = np.zeros((n, n))
    for i in range(n):
        for k in range(n):
            delta = (i - k + n // 2) % n - n // 2
            B[i, k] = bspline3(delta)
    return B


class TestBasis:
    @pytest.mark.parametrize("u, expected", [(0.0, 2 / 3), (1.0, 1 / 6), (-1.0, 1 / 6), (2.0, 0.0),
                                             (-2.0, 0.0), (3.5, 0.0)])
    def test_values(self, u, expected):
        assert bspline3(u) == pytest.approx(expected, abs=1e-15)

    @given(st.floats(-1.0, 1.0))
    def test_partition_of_unity(self, u):
        assert sum(bspline3(u - k) for k in range(-3, 4)) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_nonnegative(self):
        u = np.linspace(-3, 3, 101)
        assert np.allclose(bspline3(u), bspline3(-u))
        assert np.all(bspline3(u) >= 0)


class TestPrefilter:
    def test_constant(self):
        assert np.allclose(prefilter(np.full((8, 8), 7.5)), 7.5, atol=1e-12)

    def test_delta_matches_dense_solve(self):
        img = np.zeros((8, 8))
        img[0, 0] = 1.0
        B = np.kron(_interp_system(8), _interp_system(8))
        ref = np.linalg.solve(B, img.ravel()).reshape(8, 8)
        assert np.abs(prefilter(img) - ref).max() < 1e-12

    def test_rectangular_random(self, rng):
        img = rng.standard_normal((6, 10))
        B = np.kron(_interp_system(6), _interp_system(10))
        assert np.abs(prefilter(img) - np.linalg.solve(B, img.ravel()).reshape(6, 10)).max() < 1e-11

    def test_interpolation_identity(self, rng):
        img = rng.standard_normal((8, 8))
        assert np.abs(warp(prefilter(img), np.zeros((2, 8, 8))) - img).max() < 1e-9

    def test_stack_filtered_independently(self, rng):
        stack = rng.standard_normal((3, 8, 8))
        out = prefilter(stack)
        for k in range(3):
            assert np.allclose(out[k], prefilter(stack[k]))


class TestWarp:
    def test_constant_image_any_motion(self, rng):
        d = rng.uniform(-3, 3, (2, 8, 8))
        assert np.allclose(warp(prefilter(np.full((8, 8), 4.0)), d), 4.0, atol=1e-12)

    def test_integer_shift_is_roll(self, rng):
        img = rng.standard_normal((8, 8))
        d = np.zeros((2, 8, 8))
        d[0] = 1.0
        assert np.abs(warp(prefilter(img), d) - np.roll(img, -1, axis=1)).max() <= 1e-9

    def test_vertical_shift_is_roll(self, rng):
        img = rng.standard_normal((8, 6))
        d = np.zeros((2, 8, 6))
        d[1] = -2.0
        assert np.abs(warp(prefilter(img), d) - np.roll(img, 2, axis=0)).max() <= 1e-9

    def test_matches_dense_oracle(self, rng):
        d = rng.uniform(-2, 2, (2, 8, 8))
        x = rng.standard_normal((8, 8))
        ref = (dense_warp(d, (8, 8)) @ x.ravel()).reshape(8, 8)
        assert np.abs(Warp(d)(prefilter(x)) - ref).max() < 1e-11

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_adjoint_identity(self, seed):
        rng = np.random.default_rng(seed)
        d = rng.uniform(-2, 2, (2, 8, 8))
        x, z = rng.standard_normal((2, 8, 8))
        lhs = np.vdot(warp(prefilter(x), d), z)
        rhs = np.vdot(x, warp_adjoint_image(z, d))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)

    def test_zero_motion_adjoint_is_identity(self, rng):
        z = rng.standard_normal((8, 8))
        assert np.abs(warp_adjoint_image(z, np.zeros((2, 8, 8))) - z).max() < 1e-9

    def test_zero_zeta(self, rng):
        assert not np.any(warp_adjoint_image(np.zeros((8, 8)), rng.standard_normal((2, 8, 8))))

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            Warp(np.zeros((3, 8, 8)))
        with pytest.raises(ValueError):
            Warp(np.full((2, 8, 8), np.inf))
        with pytest.raises(ValueError):
            Warp(np.zeros((2, 8, 8)))(np.zeros((6, 6)))

    def test_channels_share_motion(self, rng):
        d = rng.uniform(-1, 1, (2, 8, 8))
        coeffs = rng.standard_normal((3, 8, 8))
        w = Warp(d)
        out = w(coeffs)
        for k in range(3):
            assert np.allclose(out[k], w(coeffs[k]))


class TestMotionJacobian:
    def test_constant_image_zero(self, rng):
        g = warp_jacobian_motion_apply(prefilter(np.full((8, 8), 3.0)), rng.uniform(-1, 1, (2, 8, 8)),
                                       rng.standard_normal((8, 8)))
        assert np.abs(g).max() < 1e-7

    def test_ramp(self):
        # x(row, col) = col jumps at the periodic seam; the seam's influence on
        # the spline coefficients decays geometrically, so the center is clean
        img = np.tile(np.arange(64.0), (64, 1))
        g = warp_jacobian_motion_apply(prefilter(img), np.zeros((2, 64, 64)), np.ones((64, 64)))
        interior = (slice(28, 36), slice(28, 36))
        assert np.abs(g[0][interior] - 1.0).max() <= 1e-9
        assert np.abs(g[1][interior]).max() <= 1e-9

    def test_matches_finite_differences(self, rng):
        d = rng.uniform(-1, 1, (2, 8, 8))
        coeffs = prefilter(rng.standard_normal((8, 8)))
        zeta = rng.standard_normal((8, 8))
        g = warp_jacobian_motion_apply(coeffs, d, zeta)
        for k in rng.choice(128, 10, replace=False):
            dp, dm = d.copy(), d.copy()
            dp.flat[k] += 1e-5
            dm.flat[k] -= 1e-5
            fd = (np.vdot(warp(coeffs, dp), zeta) - np.vdot(warp(coeffs, dm), zeta)) / 2e-5
            assert g.flat[k] == pytest.approx(fd, rel=1e-5, abs=1e-7)

    def test_channels_summed(self, rng):
        d = rng.uniform(-1, 1, (2, 8, 8))
        coeffs = rng.standard_normal((2, 8, 8))
        zeta = rng.standard_normal((2, 8, 8))
        w = Warp(d)
        total = w.motion_gradient(coeffs[0], zeta[0]) + w.motion_gradient(coeffs[1], zeta[1])
        assert np.allclose(w.motion_gradient(coeffs, zeta), total)
