import warnings

import numpy as np
import pytest

from asyncnet.data import AgentDataProfile, ScenarioTruth
from asyncnet.errors import DimensionGuardError, SingularMatrixError
from asyncnet.moments import compute_moments, mean_matrix
from asyncnet.network import BernoulliAsyncModel, build_topology
from asyncnet.rng import stream
from asyncnet.theory import (build_F_async, build_F_sync, build_H, build_R_async, build_R_sync,
                             estimate_full_F_mc, msd_general, msd_lms_async, msd_lms_sync,
                             predict, spectral_radius, stability_check, step_size_moments)
from asyncnet.validate import random_model, random_truth

from conftest import white_truth


def single_agent(q=1.0, mu=0.002, R=None, sigma_xi2=0.01):
    model = BernoulliAsyncModel.from_topology(build_topology("full(1)"), q=q, mu=mu)
    R = np.eye(2) if R is None else R
    truth = ScenarioTruth(w_o=[1.0, 0.0], profiles=[AgentDataProfile(R_u=R, sigma_xi2=sigma_xi2)])
    return model, truth


def line3_scenario(q=(0.3, 0.5, 0.9), sigma_xi2=(0.01, 0.02, 0.005), eta=0.5):
    topo = build_topology("line(3)")
    model = BernoulliAsyncModel.from_topology(topo, q=list(q), eta=eta, mu=0.002)
    return model, white_truth(3, M=2, sigma_u2=1.0, sigma_xi2=list(sigma_xi2))


@pytest.mark.parametrize("q,mu,mu_bar,mu2,c_mu", [
    (1.0, 0.002, 0.002, 4e-6, 0.0),
    (0.5, 0.01, 0.005, 5e-5, 2.5e-5),
])
def test_step_size_moments(q, mu, mu_bar, mu2, c_mu):
    model, _ = single_agent(q=q, mu=mu)
    sm = step_size_moments(model)
    assert sm.mu_bar[0] == pytest.approx(mu_bar)
    assert sm.mu2_bar[0] == pytest.approx(mu2)
    assert sm.c_mu_diag[0] == pytest.approx(c_mu, abs=1e-20)
    assert sm.c_mu_diag[0] == pytest.approx(sm.mu2_bar[0] - sm.mu_bar[0] ** 2, abs=1e-20)


def test_nu_is_mu_over_sqrt_q():
    model, _ = single_agent(q=0.25, mu=0.002)
    assert step_size_moments(model).nu == pytest.approx(0.004)


@pytest.mark.parametrize("q,mu,R,stable", [
    (1.0, 0.002, np.eye(2), True),
    (1.0, 1.5, np.eye(2), False),
    (0.5, 0.002, np.diag([1.0, 4.0]), True),
    (0.5, 0.07, np.diag([1.0, 4.0]), False),
])
def test_stability_check(q, mu, R, stable):
    model, truth = single_agent(q=q, mu=mu, R=R)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = stability_check(step_size_moments(model), truth)
    assert rep.ms_stable is stable
    assert rep.necessary_only


def test_stability_warns_when_alpha_zero():
    model, truth = single_agent()
    with pytest.warns(UserWarning, match="necessary"):
        stability_check(step_size_moments(model), truth, alpha=0.0)


def test_build_H_single_agent():
    model, truth = single_agent()
    mom = compute_moments(model)
    np.testing.assert_allclose(build_H(mom.p_bar, step_size_moments(model), truth),
                               0.002 * np.eye(4), atol=1e-18)


def test_build_H_equal_profiles():
    model = BernoulliAsyncModel.from_topology(build_topology("full(2)"), q=0.5, mu=0.01)
    R = np.array([[2.0, 0.3j], [-0.3j, 1.0]])
    truth = ScenarioTruth(w_o=[1, 1], profiles=[AgentDataProfile(R, 0.01)] * 2)
    H = build_H([0.5, 0.5], step_size_moments(model), truth)
    expected = np.zeros((4, 4), dtype=complex)
    expected[:2, :2], expected[2:, 2:] = R, R.T
    np.testing.assert_allclose(H, 0.005 * expected, atol=1e-15)


def test_build_H_matches_brute_force():
    model, truth = line3_scenario()
    mom = compute_moments(model)
    H = build_H(mom.p_bar, step_size_moments(model), truth)
    oracle = np.zeros((4, 4), dtype=complex)
    for k, prof in enumerate(truth.profiles):
        block = np.zeros((4, 4), dtype=complex)
        block[:2, :2] = prof.R_u
        block[2:, 2:] = prof.R_u.T
        oracle += mom.p_bar[k] * model.q[k] * model.mu_nominal[k] * block
    assert np.max(np.abs(H - oracle)) <= 1e-14


def test_build_H_rejects_zero_weights():
    model, truth = single_agent()
    with pytest.raises(SingularMatrixError, match="singular H"):
        build_H([0.0], step_size_moments(model), truth)


def test_noise_covariances_single_agent_sync():
    model, truth = single_agent(q=1.0)
    mom = compute_moments(model)
    sm = step_size_moments(model)
    expected = 0.002 ** 2 * 0.01 * np.eye(4)
    np.testing.assert_allclose(build_R_sync(mom.p_bar, sm, truth), expected, atol=1e-20)
    np.testing.assert_allclose(build_R_async(mom.P_p, sm, truth), expected, atol=1e-20)


def test_noise_covariance_ratio_half_q():
    model, truth = single_agent(q=0.5)
    mom = compute_moments(model)
    sm = step_size_moments(model)
    ratio = np.diag(build_R_async(mom.P_p, sm, truth)) / np.diag(build_R_sync(mom.p_bar, sm, truth))
    np.testing.assert_allclose(ratio.real, 2.0)


def test_R_async_minus_R_sync_psd():
    model, truth = line3_scenario()
    mom = compute_moments(model)
    sm = step_size_moments(model)
    diff = build_R_async(mom.P_p, sm, truth) - build_R_sync(mom.p_bar, sm, truth)
    assert np.linalg.eigvalsh(diff)[0] >= -1e-20
    assert np.trace(diff).real > 0


def test_F_sync_radius_is_rho0_squared():
    model, truth = line3_scenario()
    rep = predict(model, truth)
    assert rep.rho_ms_sync == pytest.approx(rep.rho_mean ** 2, abs=1e-10)
    assert 0 < rep.rho_mean < 1


def test_F_async_equals_F_sync_when_deterministic():
    model, truth = line3_scenario(q=(1, 1, 1), eta=1.0)
    mom = compute_moments(model)
    sm = step_size_moments(model)
    np.testing.assert_allclose(build_F_async(mom.P_p, sm, truth),
                               build_F_sync(mom.p_bar, sm, truth), atol=1e-15)


def test_rate_gap_order_nu_squared():
    model, truth = line3_scenario()
    rep = predict(model, truth)
    gap = rep.rho_ms_async - rep.rho_ms_sync
    assert 0 < gap <= 100 * rep.nu ** 2


def test_msd_general_scaled_identity():
    M = 3
    assert msd_general(2.0 * np.eye(2 * M), 0.5 * np.eye(2 * M)) == pytest.approx(2 * M * 0.5 / 8)


def test_msd_single_agent_lms():
    model, truth = single_agent()
    rep = predict(model, truth)
    assert rep.msd["dist_sync"] == pytest.approx(2e-5, rel=1e-12)
    assert rep.msd_db["dist_sync"] == pytest.approx(-46.99, abs=0.01)


def test_lms_closed_forms_single_agent_half_q():
    model, truth = single_agent(q=0.5)
    mom = compute_moments(model)
    assert msd_lms_async(mom.p_bar, mom.P_p, model, truth) == pytest.approx(2e-5, rel=1e-12)
    assert msd_lms_sync(mom.p_bar, model, truth) == pytest.approx(1e-5, rel=1e-12)


def test_lms_closed_forms_line3():
    model, truth = line3_scenario()
    mom = compute_moments(model)
    sm = step_size_moments(model)
    H = build_H(mom.p_bar, sm, truth)
    general = msd_general(H, build_R_async(mom.P_p, sm, truth))
    assert general == pytest.approx(msd_lms_async(mom.p_bar, mom.P_p, model, truth), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_predictions_matched_and_ordered(seed):
    rng = stream(seed, "theory-test")
    model = random_model(rng)
    truth = random_truth(model.n_agents, 2, rng)
    rep = predict(model, truth)
    assert rep.msd["dist_async"] == pytest.approx(rep.msd["cent_async"], rel=1e-12)
    assert rep.msd["dist_sync"] == pytest.approx(rep.msd["cent_sync"], rel=1e-12)
    assert rep.msd["dist_async"] > rep.msd["dist_sync"]
    assert rep.msd["dist_async"] == pytest.approx(rep.msd_lms["async"], rel=1e-12)


def test_msd_linear_in_mu():
    model, truth = line3_scenario()
    full = predict(model, truth).msd
    half = predict(model.with_mu(0.001), truth).msd
    for s in full:
        assert half[s] == pytest.approx(full[s] / 2, rel=1e-12)


def test_rate_gap_slope_quadratic():
    model, truth = line3_scenario()
    mus = np.array([0.001, 0.002, 0.004])
    gaps = []
    for mu in mus:
        rep = predict(model.with_mu(mu), truth)
        gaps.append(rep.rho_ms_async - rep.rho_ms_sync)
    slope = np.polyfit(np.log(mus), np.log(gaps), 1)[0]
    assert abs(slope - 2) <= 0.5


def test_theory_report_json_keys(ring4_async):
    rep = predict(ring4_async, white_truth(4, M=1))
    doc = rep.to_dict()
    assert {"nu", "rho_mean", "rho_ms_sync", "rho_ms_async", "msd_db"} <= set(doc)
    assert set(doc["msd_db"]) == {"dist_sync", "dist_async", "cent_sync", "cent_async"}


def test_spectral_radius_large_uses_sparse_solver():
    rng = stream(0, "radius")
    F = np.diag(rng.uniform(0, 0.9, 1100))
    F[5, 5] = 0.95
    assert spectral_radius(F) == pytest.approx(0.95)


def test_full_operator_deterministic_exact():
    model = BernoulliAsyncModel.from_topology(build_topology("ring(3)"), mu=0.01)
    truth = white_truth(3, M=1, sigma_u2=[0.5, 1.0, 2.0])
    est = estimate_full_F_mc(model, truth, samples=1000, rng=0)
    # with everything deterministic the estimate is rho(B)^2 with no spread
    H = np.diag(np.repeat([0.5, 1.0, 2.0], 2))
    B = np.kron(mean_matrix(model), np.eye(2)).T @ (np.eye(6) - 0.01 * H)
    assert est.rho_hat == pytest.approx(np.max(np.abs(np.linalg.eigvals(B))) ** 2, rel=1e-10)
    assert est.stderr == 0.0


def test_full_operator_self_consistent():
    model = BernoulliAsyncModel.from_topology(build_topology("ring(3)"), q=[0.5, 0.7, 0.9],
                                              eta=0.6, mu=0.002)
    truth = white_truth(3, M=1, sigma_u2=[0.8, 1.0, 1.3])
    small = estimate_full_F_mc(model, truth, samples=2000, rng=stream(1, "small"))
    big = estimate_full_F_mc(model, truth, samples=20_000, rng=stream(1, "big"))
    assert abs(small.rho_hat - big.rho_hat) <= 3 * small.stderr + 3 * big.stderr
    rho = predict(model, truth).rho_ms_async
    assert abs(small.rho_hat - rho) <= 0.1 * (1 - rho)


def test_full_operator_guards():
    model = BernoulliAsyncModel.from_topology(build_topology("ring(20)"), mu=0.002)
    with pytest.raises(DimensionGuardError):
        estimate_full_F_mc(model, white_truth(20, M=2), samples=1000)
    small = BernoulliAsyncModel.from_topology(build_topology("ring(3)"), mu=0.002)
    with pytest.raises(ValueError):
        estimate_full_F_mc(small, white_truth(3, M=1), samples=10)
