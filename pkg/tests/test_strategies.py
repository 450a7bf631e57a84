import math

import numpy as np
import pytest

from difflab.models import LogisticModel, QuadraticModel, quad_noise_stats, synthetic_logistic_dataset
from difflab.netgraph import metropolis_weights, random_connected_topology
from difflab.strategies import (
    NetworkState,
    StepSchedule,
    StrategyKind,
    centralized_step,
    consensus_step,
    diffusion_step,
    noncoop_step,
    step_size,
)


class FixedGradient:
    """Stub model whose gradient is whatever array is passed as the sample features."""

    def gradient(self, w, h, y):
        return np.broadcast_to(h, np.shape(w)).copy()


def quad(dim=2, s2=1.0):
    return QuadraticModel(np.full(dim, 1 / math.sqrt(dim)), s2)


class TestStepSize:
    @pytest.mark.parametrize("mu,i,expected", [(1.5, 1, 1.5), (1.5, 3, 0.5), (0.2, 10, 0.02)])
    def test_values(self, mu, i, expected):
        assert step_size(StepSchedule(mu), i) == pytest.approx(expected, rel=1e-15)

    def test_starts_at_one(self):
        with pytest.raises(ValueError):
            step_size(StepSchedule(1.0), 0)

    def test_rejects_non_positive_mu(self):
        with pytest.raises(ValueError):
            StepSchedule(0.0)

    def test_parse_strategy(self):
        assert StrategyKind.parse("Diffusion") is StrategyKind.DIFFUSION
        with pytest.raises(ValueError, match="unknown strategy"):
            StrategyKind.parse("gossip")


class TestNonCooperative:
    def test_zero_gradient_leaves_state(self):
        m = quad(s2=0.0)
        st = NetworkState(np.broadcast_to(m.w_opt, (4, 2)).copy())
        before = st.estimates.copy()
        noncoop_step(st, m, StepSchedule(1.5), np.random.default_rng(0))
        np.testing.assert_allclose(st.estimates, before, atol=1e-15)
        assert st.iteration == 1

    def test_hand_step(self):
        m = QuadraticModel(np.zeros(1))
        st = NetworkState(np.zeros((1, 1)))
        noncoop_step(st, m, StepSchedule(1.0), samples=(np.ones((1, 1)), np.ones(1)))
        assert st.estimates[0, 0] == 2.0

    def test_needs_rng_or_samples(self):
        with pytest.raises(ValueError):
            noncoop_step(NetworkState.zeros(2, 2), quad(), StepSchedule(1.0))


class TestReductions:
    """A = I and N = 1 collapse every cooperative rule to the stand-alone one."""

    @pytest.mark.parametrize("step", [diffusion_step, consensus_step])
    def test_identity_combiner_matches_noncoop(self, step):
        m = quad()
        sched = StepSchedule(1.5)
        a = np.eye(5)
        ref, other = NetworkState.zeros(5, 2), NetworkState.zeros(5, 2)
        rng_a, rng_b = np.random.default_rng(3), np.random.default_rng(3)
        for _ in range(200):
            noncoop_step(ref, m, sched, rng_a)
            step(other, a, m, sched, rng_b)
        assert np.array_equal(ref.estimates, other.estimates)

    def test_single_node_all_equal(self):
        m = quad()
        sched = StepSchedule(1.5)
        nc, df, cs = (NetworkState.zeros(1, 2) for _ in range(3))
        w_central = np.zeros(2)
        rngs = [np.random.default_rng(9) for _ in range(4)]
        a = metropolis_weights(random_connected_topology(1, 0.5, np.random.default_rng(0)))
        for i in range(1, 300):
            noncoop_step(nc, m, sched, rngs[0])
            diffusion_step(df, a, m, sched, rngs[1])
            consensus_step(cs, a, m, sched, rngs[2])
            w_central = centralized_step(w_central, m, sched, 1, rngs[3], iteration=i)
        assert np.array_equal(nc.estimates, df.estimates)
        assert np.array_equal(nc.estimates, cs.estimates)
        assert np.array_equal(nc.estimates[0], w_central)


class TestCentralized:
    def test_identical_samples_match_noncoop(self):
        m = quad()
        h = np.tile(np.array([0.3, -1.2]), (6, 1))
        y = np.full(6, 0.7)
        w = np.array([0.1, 0.2])
        got = centralized_step(w, m, StepSchedule(1.0), 6, samples=(h, y), iteration=2)
        st = NetworkState(w[None, :].copy(), iteration=1)
        noncoop_step(st, m, StepSchedule(1.0), samples=(h[:1], y[:1]))
        np.testing.assert_allclose(got, st.estimates[0], rtol=1e-14)

    def test_averaged_gradient_variance(self):
        m = quad(s2=1.0)
        n_virtual, steps = 10, 10_000
        rng = np.random.default_rng(4)
        w = np.broadcast_to(m.w_opt, (steps, 2)).copy()
        # one update from w_opt with mu(1) = 1 exposes -(1/N) sum of gradients
        moved = centralized_step(w, m, StepSchedule(1.0), n_virtual, rng, iteration=1)
        g_avg = w - moved
        emp = np.sum(np.var(g_avg, axis=0))
        assert emp == pytest.approx(quad_noise_stats(m).trace / n_virtual, rel=0.05)

    def test_needs_iteration(self):
        with pytest.raises(ValueError):
            centralized_step(np.zeros(2), quad(), StepSchedule(1.0), 2, np.random.default_rng(0))


class TestCombine:
    def test_two_nodes_average_out(self):
        m = quad(s2=0.0)
        e = np.array([0.3, -0.4])
        a = np.array([[0.5, 0.5], [0.5, 0.5]])
        st = NetworkState(np.stack([m.w_opt + e, m.w_opt - e]))
        zero = (np.zeros((2, 2)), np.zeros(2))
        diffusion_step(st, a, FixedGradient(), StepSchedule(1.0), samples=zero)
        np.testing.assert_allclose(st.estimates, np.stack([m.w_opt, m.w_opt]), atol=1e-15)

    def test_consensus_vs_diffusion_by_hand(self):
        a = np.full((2, 2), 0.5)
        grads = (np.array([[2.0], [-2.0]]), np.zeros(2))
        cs = NetworkState(np.array([[1.0], [3.0]]))
        df = NetworkState(np.array([[1.0], [3.0]]))
        consensus_step(cs, a, FixedGradient(), StepSchedule(0.1), samples=grads)
        diffusion_step(df, a, FixedGradient(), StepSchedule(0.1), samples=grads)
        np.testing.assert_allclose(cs.estimates[:, 0], [1.8, 2.2], rtol=1e-15)
        np.testing.assert_allclose(df.psi_buffer[:, 0], [0.8, 3.2], rtol=1e-15)
        np.testing.assert_allclose(df.estimates[:, 0], [2.0, 2.0], rtol=1e-15)

    def test_zero_gradient_same_combine(self):
        a = metropolis_weights(random_connected_topology(6, 0.5, np.random.default_rng(1)))
        w0 = np.random.default_rng(2).standard_normal((6, 3))
        zero = (np.zeros((6, 3)), np.zeros(6))
        cs, df = NetworkState(w0.copy()), NetworkState(w0.copy())
        consensus_step(cs, a, FixedGradient(), StepSchedule(1.0), samples=zero)
        diffusion_step(df, a, FixedGradient(), StepSchedule(1.0), samples=zero)
        assert np.array_equal(cs.estimates, df.estimates)

    @pytest.mark.parametrize("step", [diffusion_step, consensus_step])
    def test_dimension_mismatch(self, step):
        with pytest.raises(ValueError, match="nodes"):
            step(NetworkState.zeros(3, 2), np.eye(4), quad(), StepSchedule(1.0), np.random.default_rng(0))

    def test_batched_runs_match_single_runs(self):
        m = quad()
        a = metropolis_weights(random_connected_topology(5, 0.5, np.random.default_rng(1))).a
        rng = np.random.default_rng(8)
        batch = NetworkState.zeros(5, 2, batch=(3,))
        singles = [NetworkState.zeros(5, 2) for _ in range(3)]
        for _ in range(50):
            h, y = m.sample(rng, (3, 5))
            diffusion_step(batch, a, m, StepSchedule(1.5), samples=(h, y))
            for r in range(3):
                diffusion_step(singles[r], a, m, StepSchedule(1.5), samples=(h[r], y[r]))
        for r in range(3):
            assert np.array_equal(batch.estimates[r], singles[r].estimates)


class TestCostParity:
    def test_same_gradient_and_combine_counts(self):
        m = quad()
        a = metropolis_weights(random_connected_topology(8, 0.4, np.random.default_rng(0)))
        df, cs = NetworkState.zeros(8, 2), NetworkState.zeros(8, 2)
        for _ in range(7):
            diffusion_step(df, a, m, StepSchedule(1.0), np.random.default_rng(1))
            consensus_step(cs, a, m, StepSchedule(1.0), np.random.default_rng(1))
        assert df.grad_evals == cs.grad_evals == 7 * 8
        assert df.combine_macs == cs.combine_macs == 7 * np.count_nonzero(a.a) * 2


class TestConvergence:
    def test_mean_square_convergence(self):
        m = quad()
        a = metropolis_weights(random_connected_topology(10, 0.4, np.random.default_rng(0)))
        st = NetworkState.zeros(10, 2, batch=(50,))
        rng = np.random.default_rng(1)
        sched = StepSchedule(1.5)  # 2 lambda mu = 6 > 1
        initial = np.max(np.sum((st.estimates - m.w_opt) ** 2, axis=-1), axis=-1).mean()
        for _ in range(10_000 - 1):
            diffusion_step(st, a, m, sched, rng)
        final = np.max(np.sum((st.estimates - m.w_opt) ** 2, axis=-1), axis=-1).mean()
        assert final < 1e-2 * initial

    @pytest.mark.parametrize("kind", ["quadratic", "logistic"])
    def test_estimates_stay_finite(self, kind):
        if kind == "quadratic":
            m, n, mu = quad(), 20, 1.5
        else:
            h, y = synthetic_logistic_dataset(2000, 20, np.random.default_rng(0))
            m, n, mu = LogisticModel.fit(h, y, 1.0), 10, 1.0
        a = metropolis_weights(random_connected_topology(n, 0.3, np.random.default_rng(2)))
        st = NetworkState.zeros(n, m.dim)
        cs = NetworkState.zeros(n, m.dim)
        rng = np.random.default_rng(3)
        sched = StepSchedule(mu)
        for _ in range(100_000):
            samples = m.sample(rng, (n,))
            diffusion_step(st, a, m, sched, samples=samples)
            consensus_step(cs, a, m, sched, samples=samples)
        assert np.isfinite(st.estimates).all() and np.isfinite(cs.estimates).all()
