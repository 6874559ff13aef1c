import numpy as np
import pytest

from seqsr.lbfgs import LbfgsError, LbfgsParams, lbfgs_minimize, strong_wolfe


def rosenbrock(v):
    x, y = v
    f = (1 - x) ** 2 + 100 * (y - x * x) ** 2
    g = np.array([-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)])
    return f, g


class TestLbfgs:
    def test_quadratic(self, rng):
        b = rng.standard_normal(20)
        res = lbfgs_minimize(lambda x: (0.5 * np.sum((x - b) ** 2), x - b), np.zeros(20),
                             LbfgsParams(max_iters=5, gtol=1e-12))
        assert res.iterations <= 5
        assert np.abs(res.x - b).max() < 1e-10

    def test_rosenbrock(self):
        res = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]), LbfgsParams(max_iters=100, gtol=1e-10))
        assert res.iterations <= 100
        assert np.abs(res.x - 1.0).max() < 1e-6

    def test_ill_conditioned_quadratic(self, rng):
        # near the minimizer differences of f are lost in round-off; the
        # derivative-based acceptance still drives the gradient down
        scales = np.logspace(0, 3, 30)
        b = rng.standard_normal(30)
        fun = lambda x: (0.5 * np.sum(scales * (x - b) ** 2) + 1e8, scales * (x - b))
        res = lbfgs_minimize(fun, np.zeros(30), LbfgsParams(max_iters=500, gtol=1e-12))
        assert res.converged
        assert np.abs(res.x - b).max() < 1e-8

    def test_monotone_trace(self):
        res = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]), LbfgsParams(max_iters=50))
        assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))

    def test_zero_iterations(self):
        res = lbfgs_minimize(rosenbrock, np.array([0.0, 0.0]), LbfgsParams(max_iters=0))
        assert res.iterations == 0 and np.array_equal(res.x, [0.0, 0.0])

    def test_already_optimal(self):
        res = lbfgs_minimize(rosenbrock, np.array([1.0, 1.0]))
        assert res.converged and res.iterations == 0

    def test_nonfinite(self):
        with pytest.raises(LbfgsError):
            lbfgs_minimize(lambda x: (np.nan, x), np.ones(3))

    def test_params_validated(self):
        with pytest.raises(ValueError):
            LbfgsParams(c1=0.5, c2=0.4)
        with pytest.raises(ValueError):
            LbfgsParams(memory=0)


class TestLineSearch:
    def test_wolfe_conditions(self):
        x0, p = np.array([-1.2, 1.0]), -rosenbrock(np.array([-1.2, 1.0]))[1]
        f0, g0 = rosenbrock(x0)
        d0 = float(g0 @ p)

        def phi(a):
            f, g = rosenbrock(x0 + a * p)
            return f, g, float(g @ p)

        (a, f, g), failed = strong_wolfe(phi, f0, d0, 1e-3, 1e-4, 0.9)
        assert not failed
        assert f <= f0 + 1e-4 * a * d0
        assert abs(float(g @ p)) <= 0.9 * abs(d0)
