"""Property suite behind ``asyncnet validate``.

Every suite returns :class:`~asyncnet.compare.LemmaCheck` records so the
CLI, the tests and the comparison report share one format.
"""

import logging

import numpy as np

from .compare import check, moment_checks, rate_gap_slope, run_compare
from .config import materialize
from .data import AgentDataProfile, ScenarioTruth
from .moments import compute_moments
from .network import BernoulliAsyncModel, Topology, build_topology
from .presets import preset
from .rng import stream
from .simulator import sample_fusion_vectors
from .theory import (build_H, build_R_async, build_R_sync, estimate_full_F_mc, msd_general,
                     msd_lms_async, msd_lms_sync, predict, step_size_moments)

log = logging.getLogger(__name__)


def random_topology(n, rng, extra=0.3):
    """Connected graph: a random spanning tree plus each other edge w.p. ``extra``."""
    edges = {(int(rng.integers(0, k)), k) for k in range(1, n)}
    for l in range(n):
        for k in range(l + 1, n):
            if rng.random() < extra:
                edges.add((l, k))
    return Topology(n, tuple(sorted(edges)), descriptor={"kind": "edges", "n_agents": n})


def random_model(rng, n_range=(3, 12), eta_range=(0.4, 0.8), mu=0.01):
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    topo = random_topology(n, rng)
    n_links = len(topo.directed_links()[0])
    return BernoulliAsyncModel.from_topology(
        topo, q=rng.choice([0.3, 0.5, 0.7, 0.9], n),
        eta=rng.uniform(*eta_range, n_links), mu=mu)


def random_truth(n, M, rng, sigma_xi2=(0.001, 0.01)):
    """Random complex Hermitian positive-definite ``R_u`` per agent."""
    profiles = []
    for _ in range(n):
        G = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
        R = G @ G.conj().T / M + 0.5 * np.eye(M)
        profiles.append(AgentDataProfile(R_u=R, sigma_xi2=rng.uniform(*sigma_xi2)))
    w = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    return ScenarioTruth(w_o=w / np.linalg.norm(w), profiles=profiles)


def _worse(new, old):
    if old is None:
        return True
    if new.relation in (">=", ">"):
        return new.measured < old.measured
    return new.measured > old.measured


def moment_suite(n_models=100, seed=0):
    """Lemma 1/4 and Perron-residual checks over random Bernoulli models.

    Returns one aggregated check per property, holding the worst value seen.
    """
    rng = stream(seed, "validate", "moments")
    worst = {}
    for _ in range(n_models):
        model = random_model(rng)
        for c in moment_checks(compute_moments(model)):
            if _worse(c, worst.get(c.name)):
                worst[c.name] = c
    out = []
    for c in worst.values():
        c.detail = f"worst of {n_models} random models: {c.detail}"
        out.append(c)
    return out


def fusion_suite(samples=200_000, seed=0, t=100):
    """Empirical moments of the fusion vector on ring(5), eta = 0.6."""
    model = BernoulliAsyncModel.from_topology(build_topology("ring(5)"), q=1.0, eta=0.6)
    mom = compute_moments(model)
    rng = stream(seed, "validate", "fusion")
    total = np.zeros(5)
    outer = np.zeros((5, 5))
    batch = 20_000
    done = 0
    while done < samples:
        size = min(batch, samples - done)
        phi = sample_fusion_vectors(model, t, size, rng)
        total += phi.sum(axis=0)
        outer += phi.T @ phi
        done += size
    mean_err = np.max(np.abs(total / samples - mom.p_bar))
    second_err = np.max(np.abs(outer / samples - mom.P_p))
    return [
        check("fusion_mean_vs_pbar", mean_err, 5e-3, "<=", f"{samples} draws, t={t}"),
        check("fusion_second_moment_vs_p", second_err, 1e-2, "<=", f"{samples} draws, t={t}"),
    ]


def closed_form_suite(n_configs=20, seed=0):
    """General ``Tr(H^-1 R)/4`` against the LMS closed forms."""
    rng = stream(seed, "validate", "closed-form")
    worst = 0.0
    for _ in range(n_configs):
        model = random_model(rng, mu=float(rng.uniform(1e-3, 1e-2)))
        truth = random_truth(model.n_agents, int(rng.integers(1, 4)), rng)
        mom = compute_moments(model)
        sm = step_size_moments(model)
        H = build_H(mom.p_bar, sm, truth)
        pairs = ((msd_general(H, build_R_async(mom.P_p, sm, truth)),
                  msd_lms_async(mom.p_bar, mom.P_p, model, truth)),
                 (msd_general(H, build_R_sync(mom.p_bar, sm, truth)),
                  msd_lms_sync(mom.p_bar, model, truth)))
        for general, closed in pairs:
            worst = max(worst, abs(general - closed) / abs(closed))
    return [check("closed_form_cross_check", worst, 1e-12, "<=",
                  f"max relative gap over {n_configs} random configurations")]


def full_operator_suite(samples=10_000, seed=0):
    """Monte Carlo spectral radius of the full operator against rho(F_async)."""
    model = BernoulliAsyncModel.from_topology(build_topology("ring(4)"), q=[0.3, 0.5, 0.7, 0.9],
                                              eta=0.6, mu=0.002)
    truth = ScenarioTruth(w_o=[1.0], profiles=[AgentDataProfile.white(s, 0.01, 1)
                                               for s in (0.8, 1.0, 1.2, 1.5)])
    rho = predict(model, truth).rho_ms_async
    est = estimate_full_F_mc(model, truth, samples=samples, rng=stream(seed, "validate", "full-F"))
    return [check("full_operator_mc", abs(est.rho_hat - rho), 0.1 * (1 - rho), "<=",
                  f"rho_hat={est.rho_hat:.8f}, rho(F_async)={rho:.8f}, stderr={est.stderr:.2e}")]


def rate_slope_suite(config=None):
    config = config or preset("desk")
    scenario = materialize(config)
    slope, _ = rate_gap_slope(scenario.model, scenario.truth, [0.001, 0.002, 0.004])
    return [check("rate_gap_slope_desk", abs(slope - 2.0), 0.5, "<=",
                  f"slope {slope:.4f} over mu in {{0.001, 0.002, 0.004}}")]


def run_validation(quick=False, seed=0):
    """All suites.  ``quick`` shrinks sample counts and skips the desk simulation."""
    checks = []
    checks += moment_suite(20 if quick else 100, seed)
    checks += fusion_suite(50_000 if quick else 200_000, seed)
    checks += closed_form_suite(5 if quick else 20, seed)
    checks += full_operator_suite(10_000, seed)
    checks += rate_slope_suite()
    desk = preset("desk")
    report = run_compare(desk, simulate_strategies=not quick)
    for c in report.lemma_checks:
        c.name = f"desk_{c.name}"
    return checks + report.lemma_checks
