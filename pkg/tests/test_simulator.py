import numpy as np
import pytest

from asyncnet import simulator
from asyncnet.errors import InsufficientIterationsError, NumericalDivergenceError
from asyncnet.moments import compute_moments
from asyncnet.network import BernoulliAsyncModel, build_topology
from asyncnet.rng import stream
from asyncnet.simulator import (average_curves, run_centralized_async, run_centralized_sync,
                                run_diffusion_async, run_diffusion_sync, sample_fusion_vector,
                                sample_fusion_vectors, simulate, steady_state)
from asyncnet.theory import STRATEGIES

from conftest import white_truth

RUNNERS = [run_diffusion_async, run_diffusion_sync, run_centralized_async, run_centralized_sync]


@pytest.fixture
def ring5():
    return BernoulliAsyncModel.from_topology(build_topology("ring(5)"), q=[0.3, 0.5, 0.7, 0.9, 0.6],
                                             eta=0.6, mu=0.01)


@pytest.mark.parametrize("runner", RUNNERS)
def test_fixed_point(ring5, runner):
    truth = white_truth(5, M=2, sigma_xi2=0.0, w_o=[0.6, -0.8j])
    res = runner(ring5, truth, 300, rng=1, init=truth.w_o)
    assert np.max(res.msd) <= 1e-28


@pytest.mark.parametrize("runner", RUNNERS)
def test_zero_step_size_keeps_initial_error(ring5, runner):
    truth = white_truth(5, M=2, w_o=[0.6, 0.8])
    res = runner(ring5.with_mu(0.0), truth, 50, rng=1)
    np.testing.assert_allclose(res.msd, 1.0, rtol=1e-14)


def test_deterministic_async_equals_sync():
    model = BernoulliAsyncModel.from_topology(build_topology("ring(5)"), mu=0.01)
    truth = white_truth(5)
    a = run_diffusion_async(model, truth, 400, rng=7)
    s = run_diffusion_sync(model, truth, 400, rng=7)
    np.testing.assert_allclose(a.msd, s.msd, rtol=1e-12)


def test_single_agent_cent_sync_equals_dist_sync():
    model = BernoulliAsyncModel.from_topology(build_topology("full(1)"), mu=0.01)
    truth = white_truth(1)
    a = run_centralized_sync(model, truth, 300, rng=3)
    b = run_diffusion_sync(model, truth, 300, rng=3)
    np.testing.assert_allclose(a.msd, b.msd, rtol=1e-12)


@pytest.mark.parametrize("strategy,q", [("dist_sync", 1.0), ("cent_async", 0.5)])
def test_single_agent_lms_steady_state(strategy, q):
    mu, M, s2 = 0.01, 2, 0.01
    model = BernoulliAsyncModel.from_topology(build_topology("full(1)"), q=q, mu=mu)
    runs = simulate(model, white_truth(1, M=M, sigma_xi2=s2), 4000, 20, seed=2,
                    strategies=(strategy,))
    est = steady_state(runs[strategy], 0.5)
    assert abs(est.msd_db - 10 * np.log10(mu / 2 * M * s2)) <= 1.0


def test_hook_receives_estimates(ring5):
    seen = []
    run_diffusion_async(ring5, white_truth(5), 5, rng=0, hook=lambda i, w: seen.append((i, w.shape)))
    assert seen == [(i, (5, 2)) for i in range(5)]


def test_fusion_vector_uniform_for_full_deterministic():
    model = BernoulliAsyncModel.from_topology(build_topology("full(4)"))
    np.testing.assert_array_equal(sample_fusion_vector(model, rng=0), np.full(4, 0.25))


def test_fusion_vectors_on_simplex(ring5):
    phi = sample_fusion_vectors(ring5, 100, 500, stream(0, "phi"))
    assert np.all(phi >= 0)
    np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-12)


def test_fusion_vector_moments(ring5):
    mom = compute_moments(ring5)
    phi = sample_fusion_vectors(ring5, 100, 40_000, stream(0, "phi-moments"))
    assert np.max(np.abs(phi.mean(axis=0) - mom.p_bar)) <= 5e-3
    assert np.max(np.abs(phi.T @ phi / len(phi) - mom.P_p)) <= 1e-2


def test_trials_do_not_depend_on_batching(ring5, monkeypatch):
    truth = white_truth(5)
    many = simulate(ring5, truth, 250, 7, seed=11)
    monkeypatch.setattr(simulator, "TRIAL_BLOCK", 3)
    few = simulate(ring5, truth, 250, 2, seed=11, trial_offset=4)
    for s in STRATEGIES:
        np.testing.assert_array_equal(many[s][4:6], few[s])


def test_threads_do_not_change_results(ring5, monkeypatch):
    truth = white_truth(5)
    one = simulate(ring5, truth, 120, 25, seed=5, strategies=("dist_async", "cent_async"))
    monkeypatch.setenv("ASYNCNET_THREADS", "3")
    three = simulate(ring5, truth, 120, 25, seed=5, strategies=("dist_async", "cent_async"))
    for s in one:
        np.testing.assert_array_equal(one[s], three[s])


def test_common_random_numbers(ring5):
    truth = white_truth(5)
    both = simulate(ring5, truth, 100, 2, seed=9, strategies=("dist_async", "dist_sync"))
    alone = simulate(ring5, truth, 100, 2, seed=9, strategies=("dist_sync",))
    np.testing.assert_array_equal(both["dist_sync"], alone["dist_sync"])


def test_fusion_pool_mode(ring5):
    truth = white_truth(5)
    a = simulate(ring5, truth, 150, 2, seed=1, strategies=("cent_async",), fusion_pool=64)
    b = simulate(ring5, truth, 150, 2, seed=1, strategies=("cent_async",), fusion_pool=64)
    np.testing.assert_array_equal(a["cent_async"], b["cent_async"])
    assert np.all(np.isfinite(a["cent_async"]))


def test_real_data_mode(ring5):
    truth = white_truth(5, w_o=[1.0, 0.0])
    runs = simulate(ring5, truth, 100, 2, seed=1, complex_data=False)
    assert all(np.all(np.isfinite(v)) for v in runs.values())


def test_divergence_is_reported(ring5):
    truth = white_truth(5, sigma_u2=5.0)
    with pytest.raises(NumericalDivergenceError, match="numerical divergence") as info:
        simulate(ring5.with_mu(1.0), truth, 2000, 1, seed=0, strategies=("dist_sync",))
    assert info.value.iteration is not None
    assert np.isfinite(info.value.curves["dist_sync"][0, 0])


def test_average_constant():
    runs = np.full((1, 500), 3.0)
    est = steady_state(average_curves(runs))
    assert est.msd_linear == 3.0
    assert est.stderr == 0.0


def test_average_two_trials():
    runs = np.vstack([np.full(400, 2.0), np.full(400, 4.0)])
    curve = average_curves(runs)
    np.testing.assert_array_equal(curve.msd, 3.0)
    assert steady_state(runs).msd_linear == pytest.approx(3.0)


def test_tail_window_minimum():
    est = steady_state(np.ones((2, 1000)), 0.1)
    assert est.tail_window == 200
    assert steady_state(np.ones((2, 120)), 0.1).tail_window == 120


def test_insufficient_iterations():
    with pytest.raises(InsufficientIterationsError, match="insufficient iterations"):
        steady_state(np.ones((3, 40)))


def test_msd_db_consistent():
    est = steady_state(np.full((2, 300), 2.5e-4))
    assert est.msd_db == pytest.approx(10 * np.log10(est.msd_linear), abs=1e-12)
