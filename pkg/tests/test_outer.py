import numpy as np
import pytest

from seqsr.adjoint import SequentialModel
from seqsr.core import SolverConfig
from seqsr.operators import WaveletOp, observe
from seqsr.outer import (MAX_DOUBLINGS, BacktrackError, backtrack_alpha, backtracking_margin,
                         check_backtracking_inequality, edge_weights, eval_cost_to_move, eval_J, initialize,
                         lanczos_kernel, lanczos_upscale, regularizer, super_resolve)
from seqsr.synthetic import degrade, make_synthetic


class TestObjective:
    def test_perfect_fit_is_zero(self):
        y = np.zeros((3, 4, 4))
        assert eval_J(np.zeros((2, 8, 8)), np.zeros((2, 2, 8, 8)), np.zeros((8, 8)), y) == 0.0

    def test_p2_matches_negative_log_posterior(self, rng):
        # with known motion the p = 2 cost is twice the Gaussian negative
        # log-posterior (prior on c, process noise on eps, unit observation noise)
        cfg = SolverConfig(p=2, alpha2=0.0)
        y = rng.standard_normal((3, 4, 4))
        eps, c = rng.standard_normal((2, 8, 8)), rng.standard_normal((8, 8))
        d = rng.uniform(-1, 1, (2, 2, 8, 8))
        model = SequentialModel(y, cfg)
        x = model.synthesize(eps, d, c).x
        nlp = 0.5 * np.sum((observe(x) - y) ** 2) + 0.5 * cfg.alpha1 * np.sum(eps**2) \
            + 0.5 * cfg.alpha3 * np.sum(c**2)
        assert eval_J(eps, d, c, y, cfg) == pytest.approx(2 * nlp, rel=1e-12)

    def test_cost_to_move(self, rng):
        e, c = rng.standard_normal((2, 8, 8)), rng.standard_normal((8, 8))
        assert eval_cost_to_move(e, e, c, c) == 0.0
        assert eval_cost_to_move(e, e, c + 1.0, c) == pytest.approx(64.0)

    def test_regularizer_weighted(self, rng):
        d = rng.standard_normal((2, 2, 6, 6))
        assert regularizer(d, np.full((2, 6, 6), 3.0)) == pytest.approx(3 * regularizer(d))
        assert regularizer(np.ones((2, 2, 6, 6))) == 0.0


class TestBacktracking:
    def test_zero_step_holds_at_first_index(self, rng):
        d = rng.standard_normal((1, 2, 6, 6))
        g = rng.standard_normal((1, 2, 6, 6))
        assert check_backtracking_inequality(5.0, 5.0, d, d, g, 1, 100.0, 8e3)
        assert backtracking_margin(5.0, 5.0, d, d, g, 1, 100.0, 8e3) == 0.0

    def test_margin_grows_with_index(self, rng):
        d_prev = rng.standard_normal((1, 2, 6, 6))
        d_new = d_prev + 0.1
        g = rng.standard_normal((1, 2, 6, 6))
        m = [backtracking_margin(1.0, 0.5, d_new, d_prev, g, i, 1.0, 1.0) for i in range(1, 6)]
        assert all(b > a for a, b in zip(m, m[1:]))

    def test_quadratic_data_term(self, rng):
        # B(d) = L/2 ||d - m||^2 with gradient step candidates: accepted once 2^i xi >= L
        L, m = 50.0, rng.standard_normal((1, 2, 6, 6))
        d_prev = np.zeros_like(m)
        B = lambda d: 0.5 * L * float(np.sum((d - m) ** 2))
        grad = L * (d_prev - m)
        cfg = SolverConfig(alpha2=0.0, xi=1.0)
        res = backtrack_alpha(lambda a: d_prev - grad / a, d_prev, grad, cfg, B)
        assert not res.kept and res.trials <= MAX_DOUBLINGS
        assert res.alpha >= L / 2
        assert check_backtracking_inequality(res.B, B(d_prev), res.d, d_prev, grad, res.i, 1.0, 0.0)
        assert res.B < B(d_prev)

    def test_never_satisfied_raises(self):
        d_prev = np.zeros((1, 2, 6, 6))
        cfg = SolverConfig(alpha2=0.0, xi=1.0)
        # a data term that jumps up for any motion change
        B = lambda d: 0.0 if not np.any(d) else 1e300
        with pytest.raises(BacktrackError):
            backtrack_alpha(lambda a: d_prev + 1.0, d_prev, np.zeros_like(d_prev), cfg, B)

    def test_keeps_previous_when_nothing_decreases(self):
        d_prev = np.zeros((1, 2, 6, 6))
        cfg = SolverConfig(alpha2=0.0, xi=1.0)
        grad = np.ones_like(d_prev)
        # an uphill candidate satisfies the inequality for large alpha but raises B
        B = lambda d: float(np.sum(d))
        res = backtrack_alpha(lambda a: d_prev + 1.0 / a, d_prev, grad, cfg, B, monotone=True)
        assert res.kept and np.array_equal(res.d, d_prev)
        res = backtrack_alpha(lambda a: d_prev + 1.0 / a, d_prev, grad, cfg, B, monotone=False)
        assert not res.kept


class TestLanczos:
    def test_kernel_values(self):
        assert lanczos_kernel(0.0) == 1.0
        assert np.allclose(lanczos_kernel(np.array([1.0, 2.0, -1.0, 3.0, 4.5])), 0.0, atol=1e-15)

    def test_even_pixels_interpolate(self, rng):
        y = rng.standard_normal((2, 8, 8))
        up = lanczos_upscale(y)
        assert up.shape == (2, 16, 16)
        assert np.allclose(up[..., ::2, ::2], y)

    def test_constant_preserved(self):
        assert np.allclose(lanczos_upscale(np.full((4, 4), 9.0)), 9.0)

    def test_edge_weights(self, rng):
        y = rng.uniform(0, 255, (3, 4, 4))
        w = edge_weights(y)
        assert w.shape == (2, 8, 8)
        assert np.all((w > 0) & (w <= 1))
        assert np.allclose(edge_weights(np.full((3, 4, 4), 7.0)), 1.0)


class TestInitialize:
    def test_reproduces_lanczos_frames(self, rng):
        y = rng.standard_normal((3, 4, 4))
        d0 = rng.uniform(-1, 1, (2, 2, 8, 8))
        op = WaveletOp("haar")
        x, eps, c = initialize(y, d0, op)
        model = SequentialModel(y)
        assert np.abs(model.synthesize(eps, d0, c).x - x).max() < 1e-10
        assert np.array_equal(x, lanczos_upscale(y))


@pytest.fixture(scope="module")
def run():
    frames, d = make_synthetic((16, 16), 2, ("translate", 0.5, 0.0), seed=3)
    y = degrade(frames, 1.0, seed=4)
    cfg = SolverConfig(outer_iters=3)
    return y, d, super_resolve(y, cfg, d_true=d, keep_accepted=True)


class TestSuperResolve:
    def test_trace_complete(self, run):
        _, _, res = run
        tr = res.trace
        assert len(tr.J) == len(tr.alpha) == len(tr.trials) == len(tr.mepe) == len(tr.accepted) == 3
        rows = list(tr.rows())
        assert rows[0]["iter"] == 1 and set(rows[0]) == {"iter", "J", "alpha", "trials", "B", "mepe"}

    def test_cost_non_increasing(self, run):
        _, _, res = run
        J = [res.trace.J0] + res.trace.J
        assert all(b <= a * (1 + 1e-6) for a, b in zip(J, J[1:]))

    def test_accepted_steps_satisfy_inequality(self, run):
        cfg = SolverConfig()
        for step in run[2].trace.accepted:
            assert check_backtracking_inequality(step["B_new"], step["B_prev"], step["d_new"], step["d_prev"],
                                                 step["grad_B"], step["i"], cfg.xi, cfg.alpha2)

    def test_states_consistent(self, run):
        y, _, res = run
        model = SequentialModel(y)
        assert np.abs(model.synthesize(res.eps, res.d, res.c).x - res.x).max() < 1e-9

    def test_single_frame(self):
        frames, _ = make_synthetic((16, 16), 0, ("translate", 0.0, 0.0), seed=1)
        y = degrade(frames, 1.0, seed=2)
        res = super_resolve(y, SolverConfig(outer_iters=2))
        assert res.x.shape == (1, 16, 16) and res.d.shape == (0, 2, 16, 16)
        assert res.trace.J[-1] < res.trace.J0
        # with a light sparsity weight the deblurred frame fits the data better
        # than the interpolated start; a heavy weight may trade fit for sparsity
        cfg = SolverConfig(outer_iters=2, alpha3=1e-3)
        res = super_resolve(y, cfg)
        model = SequentialModel(y, cfg)
        assert model.data_term(res.x) <= model.data_term(res.x_init)

    def test_callback_and_init_motion(self, rng):
        frames, d = make_synthetic((16, 16), 1, ("translate", 0.5, 0.0), seed=1)
        y = degrade(frames)
        seen = []
        super_resolve(y, SolverConfig(outer_iters=1), d_init=d, callback=lambda it, tr: seen.append(it))
        assert seen == [0]
        with pytest.raises(ValueError):
            super_resolve(y, SolverConfig(outer_iters=1), d_init=np.zeros((1, 2, 8, 8)))

    def test_edge_weights_mode(self):
        frames, _ = make_synthetic((16, 16), 1, ("translate", 0.5, 0.0), seed=1)
        res = super_resolve(degrade(frames), SolverConfig(outer_iters=1, weights_mode="edge"))
        assert np.all(np.isfinite(res.x))
