import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from seqsr.prox import eval_R, group_shrink, prox_l1, soft

vals = st.floats(-100, 100, allow_nan=False)


class TestSoft:
    @pytest.mark.parametrize("a, lam, expected", [(5, 2, 3), (-5, 2, -3), (1, 2, 0), (2, 2, 0), (0, 0, 0)])
    def test_branches(self, a, lam, expected):
        assert soft(a, lam) == expected

    def test_vector(self):
        assert np.array_equal(prox_l1(np.array([5.0, -1.0, 0.5]), 1.0), [4.0, 0.0, 0.0])
        assert not np.any(prox_l1(np.zeros(4), 3.0))

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            soft(1.0, -1.0)
        with pytest.raises(ValueError):
            prox_l1([1.0], -1.0)

    @given(vals, st.floats(0, 50))
    def test_optimality(self, a, lam):
        u = soft(a, lam)
        f = lambda z: lam * abs(z) + 0.5 * (z - a) ** 2
        for s in (1e-3, -1e-3):
            assert f(u) <= f(u + s) + 1e-12

    @given(vals, vals, st.floats(0, 50))
    def test_nonexpansive(self, a, b, lam):
        assert abs(soft(a, lam) - soft(b, lam)) <= abs(a - b) + 1e-12


class TestGroupShrink:
    def test_example(self):
        out = group_shrink(np.array([3.0, 4.0, 0.0, 0.0]), 1.0, 1.0)
        assert np.allclose(out, [2.4, 3.2, 0.0, 0.0])

    def test_dead_zone(self):
        assert not np.any(group_shrink(np.array([0.3, 0.4, 0.0, 0.0]), 1.0, 0.5))
        assert not np.any(group_shrink(np.zeros((3, 3, 4)), np.ones((3, 3)), 1.0))

    def test_per_group_weights(self):
        v = np.tile([3.0, 4.0, 0.0, 0.0], (2, 1))
        out = group_shrink(v, np.array([0.0, 10.0]), 1.0)
        assert np.allclose(out[0], v[0]) and not np.any(out[1])

    def test_invalid(self):
        with pytest.raises(ValueError):
            group_shrink(np.ones(4), -1.0, 1.0)
        with pytest.raises(ValueError):
            group_shrink(np.ones(4), 1.0, -1.0)

    @given(arrays(np.float64, 4, elements=vals), st.floats(0, 5), st.floats(0, 20))
    def test_optimality(self, v, w, theta):
        u = group_shrink(v, w, theta)
        f = lambda z: theta * w * np.linalg.norm(z) + 0.5 * np.sum((z - v) ** 2)
        for k in range(4):
            for s in (1e-3, -1e-3):
                z = u.copy()
                z[k] += s
                assert f(u) <= f(z) + 1e-9

    @given(arrays(np.float64, 4, elements=vals), arrays(np.float64, 4, elements=vals), st.floats(0, 20))
    def test_nonexpansive(self, a, b, theta):
        assert np.linalg.norm(group_shrink(a, 1.0, theta) - group_shrink(b, 1.0, theta)) \
            <= np.linalg.norm(a - b) + 1e-9


class TestRegularizer:
    def test_examples(self):
        g = np.array([[[3.0, 4.0, 0.0, 0.0]]])
        assert eval_R(np.zeros((2, 2, 4))) == 0
        assert eval_R(g, 1.0, p=1) == 5.0
        assert eval_R(g, 1.0, p=2) == 25.0
        assert eval_R(g, np.array([[2.0]]), p=1) == 10.0

    def test_bad_p(self):
        with pytest.raises(ValueError):
            eval_R(np.zeros((1, 1, 4)), p=3)
