"""Theory versus simulation for one experiment configuration."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import materialize
from .errors import NumericalDivergenceError
from .moments import compute_moments
from .simulator import average_curves, simulate, steady_state
from .theory import STRATEGIES, predict

log = logging.getLogger(__name__)

PSD_FLOOR = -1e-9
ROW_SUM_TOL = 1e-9
PERRON_TOL = 1e-10
MATCH_REL_TOL = 1e-12
THEORY_SIM_DB = 1.0
MATCH_SIM_DB = 0.5
ORDER_SLACK_DB = 0.2
RATE_GAP_FRACTION = 0.05
SWEEP_BAND = 0.25
SLOPE_BAND = 0.5

PAIRS = (("dist_async", "cent_async"), ("dist_sync", "cent_sync"))
ORDERED = (("dist_async", "dist_sync"), ("cent_async", "cent_sync"))


@dataclass
class LemmaCheck:
    """One named property check with the measured value and its threshold."""

    name: str
    passed: bool
    measured: float
    threshold: float
    relation: str
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "measured": self.measured,
                "threshold": self.threshold, "relation": self.relation, "detail": self.detail}


def check(name, measured, threshold, relation, detail=""):
    measured = float(measured)
    ok = {
        "<=": measured <= threshold,
        ">=": measured >= threshold,
        ">": measured > threshold,
    }[relation]
    return LemmaCheck(name, bool(ok), measured, float(threshold), relation, detail)


@dataclass
class ComparisonReport:
    config: dict
    parameters: dict
    theory: object
    simulated: dict
    deltas: dict
    lemma_checks: list
    curves: dict = field(default_factory=dict, repr=False)
    sweep: list = field(default_factory=list)
    moments: object = field(default=None, repr=False)
    error: str = None

    @property
    def passed(self):
        return all(c.passed for c in self.lemma_checks)

    def failed_checks(self):
        return [c for c in self.lemma_checks if not c.passed]

    def to_dict(self):
        return {
            "config": self.config,
            "parameters": self.parameters,
            "theory": None if self.theory is None else self.theory.to_dict(),
            "simulated": {k: v.to_dict() for k, v in self.simulated.items()},
            "deltas_db": dict(self.deltas),
            "lemma_checks": [c.to_dict() for c in self.lemma_checks],
            "sweep": self.sweep,
            "passed": self.passed,
            "error": self.error,
        }


def moment_checks(moments):
    """Fusion-moment, PSD and Perron-residual checks on a :class:`MomentSet`."""
    C_p = moments.C_p
    eig_min = float(np.linalg.eigvalsh(0.5 * (C_p + C_p.T))[0])
    return [
        check("lemma1_fusion_row_sums", np.max(np.abs(moments.P_p.sum(axis=1) - moments.p_bar)),
              PERRON_TOL, "<=", "max |P_p 1 - pbar|"),
        check("lemma1_fusion_mean_sum", abs(moments.p_bar.sum() - 1.0), PERRON_TOL, "<=",
              "|pbar^T 1 - 1|"),
        check("lemma4_psd", eig_min, PSD_FLOOR, ">=", "min eigenvalue of C_p"),
        check("lemma4_zero_row_sums", np.max(np.abs(C_p.sum(axis=1))), ROW_SUM_TOL, "<=",
              "max |C_p 1|"),
        check("lemma4_symmetric", np.max(np.abs(C_p - C_p.T)), ROW_SUM_TOL, "<=",
              "max |C_p - C_p^T|"),
        check("perron_residual_mean", moments.residual_mean, PERRON_TOL, "<=",
              "max |Abar pbar - pbar|"),
        check("perron_residual_joint", moments.residual_joint, PERRON_TOL, "<=",
              "max |S p - p|"),
        check("perron_positive", min(moments.p_bar.min(), moments.p.min()), 0.0, ">",
              "min entry of pbar and p"),
    ]


def theory_checks(theory, model):
    msd = theory.msd
    out = []
    for a, b in PAIRS:
        out.append(check(f"lemma7_theory_{a}_vs_{b}", abs(msd[a] - msd[b]) / msd[b],
                         MATCH_REL_TOL, "<=", "relative gap of predicted MSDs"))
    gap = msd["dist_async"] - msd["dist_sync"]
    if np.any(model.q < 1):
        out.append(check("lemma9_theory_async_above_sync", gap, 0.0, ">",
                         "predicted MSD_async - MSD_sync (linear)"))
    else:
        out.append(check("lemma9_theory_async_equals_sync", abs(gap) / msd["dist_sync"],
                         MATCH_REL_TOL, "<=", "all q = 1"))
    rate_gap = theory.rho_ms_async - theory.rho_ms_sync
    out.append(check("rate_gap_nonnegative", rate_gap, -1e-12, ">=",
                     "rho(F_async) - rho(F_sync), numerical slack 1e-12"))
    out.append(check("rate_gap_small", rate_gap, RATE_GAP_FRACTION * (1 - theory.rho_ms_sync),
                     "<=", "rho(F_async) - rho(F_sync) vs 0.05 (1 - rho(F_sync))"))
    return out


def simulation_checks(theory, simulated):
    out = []
    for s, est in simulated.items():
        out.append(check(f"theory_vs_simulation_{s}", abs(est.msd_db - theory.msd_db[s]),
                         THEORY_SIM_DB, "<=", "|simulated - predicted| in dB"))
    for a, b in PAIRS:
        if a in simulated and b in simulated:
            out.append(check(f"lemma7_simulation_{a}_vs_{b}",
                             abs(simulated[a].msd_db - simulated[b].msd_db),
                             MATCH_SIM_DB, "<=", "|distributed - centralized| in dB"))
    for a, b in ORDERED:
        if a in simulated and b in simulated:
            out.append(check(f"lemma9_simulation_{a}_vs_{b}",
                             simulated[a].msd_db - simulated[b].msd_db,
                             -ORDER_SLACK_DB, ">=", "async - sync in dB"))
    return out


def rate_gap_slope(model, truth, mus):
    """Least-squares slope of ``log(rho_async - rho_sync)`` against ``log(mu)``."""
    gaps = []
    for mu in mus:
        rep = predict(model.with_mu(mu), truth)
        gaps.append(rep.rho_ms_async - rep.rho_ms_sync)
    gaps = np.asarray(gaps)
    if np.any(gaps <= 0):
        return float("nan"), gaps
    return float(np.polyfit(np.log(mus), np.log(gaps), 1)[0]), gaps


def _sweep_pair(strategies):
    for a, b in ORDERED:
        if a in strategies and b in strategies:
            return a, b
    return None


def _run_strategies(scenario, mu, strategies, moments):
    cfg = scenario.config
    model = scenario.model.with_mu(mu)
    sim = cfg.simulation
    return simulate(model, scenario.truth, sim.iterations, sim.trials, seed=cfg.seed,
                    strategies=strategies, fusion_t=sim.fusion_t, fusion_pool=sim.fusion_pool,
                    complex_data=scenario.complex_data, p_bar=moments.p_bar)


def run_compare(config, simulate_strategies=True):
    """Moments, theory, simulation and lemma checks for ``config``.

    On divergence the raised :class:`NumericalDivergenceError` carries the
    partial report as ``exc.report``.
    """
    scenario = materialize(config)
    model, truth = scenario.model, scenario.truth
    moments = compute_moments(model)
    theory = predict(model, truth, moments=moments, alpha=config.alpha)
    checks = moment_checks(moments) + theory_checks(theory, model)
    report = ComparisonReport(config=config.to_dict(), parameters=scenario.frozen_parameters(),
                              theory=theory, simulated={}, deltas={}, lemma_checks=checks,
                              moments=moments)
    enabled = config.enabled if simulate_strategies else ()
    if enabled:
        log.info("simulating %s", ", ".join(enabled))
        try:
            runs = _run_strategies(scenario, config.mu, enabled, moments)
        except NumericalDivergenceError as exc:
            report.error = str(exc)
            report.curves = {s: average_curves(v, s) for s, v in exc.curves.items()}
            exc.report = report
            raise
        tail = config.simulation.tail_fraction
        report.curves = {s: average_curves(v, s) for s, v in runs.items()}
        report.simulated = {s: steady_state(v, tail) for s, v in runs.items()}
        report.deltas = {s: theory.msd_db[s] - est.msd_db for s, est in report.simulated.items()}
        report.lemma_checks += simulation_checks(theory, report.simulated)

    if config.mu_sweep:
        report.sweep, sweep_checks = _mu_sweep(scenario, moments, report, enabled)
        report.lemma_checks += sweep_checks
    return report


def _mu_sweep(scenario, moments, report, enabled):
    cfg = scenario.config
    mus = sorted(set(cfg.mu_sweep))
    pair = _sweep_pair(enabled)
    rows, checks = [], []
    for mu in mus:
        theory = predict(scenario.model.with_mu(mu), scenario.truth, moments=moments)
        row = {"mu": mu, "theory_gap": theory.msd["dist_async"] - theory.msd["dist_sync"],
               "rate_gap": theory.rho_ms_async - theory.rho_ms_sync}
        if pair is not None:
            if mu == cfg.mu and report.simulated:
                est = report.simulated
            else:
                log.info("mu sweep: simulating %s at mu=%g", "/".join(pair), mu)
                runs = _run_strategies(scenario, mu, pair, moments)
                est = {s: steady_state(v, cfg.simulation.tail_fraction) for s, v in runs.items()}
            row["simulated_gap"] = est[pair[0]].msd_linear - est[pair[1]].msd_linear
            row["simulated_msd_db"] = {s: est[s].msd_db for s in pair}
        rows.append(row)
    if len(mus) < 2:
        return rows, checks
    lo, hi = rows[0], rows[-1]
    scale = hi["mu"] / lo["mu"]
    checks.append(check("mu_sweep_theory_gap_ratio",
                        abs(hi["theory_gap"] / lo["theory_gap"] - scale) / scale, 1e-9, "<=",
                        f"relative deviation of predicted gap ratio from {scale:g}"))
    if pair is not None:
        ratio = hi["simulated_gap"] / lo["simulated_gap"]
        checks.append(check("mu_sweep_simulated_gap_ratio_low", ratio,
                            scale * (1 - SWEEP_BAND), ">=", f"simulated gap ratio ({'/'.join(pair)})"))
        checks.append(check("mu_sweep_simulated_gap_ratio_high", ratio,
                            scale * (1 + SWEEP_BAND), "<=", f"simulated gap ratio ({'/'.join(pair)})"))
    slope, _ = rate_gap_slope(scenario.model, scenario.truth, mus)
    checks.append(check("rate_gap_slope", abs(slope - 2.0), SLOPE_BAND, "<=",
                        f"|slope - 2| of log rate gap vs log mu (slope {slope:.4f})"))
    return rows, checks


def theory_summary(config):
    """Theory only: materialize, compute moments and predict."""
    scenario = materialize(config)
    moments = compute_moments(scenario.model)
    theory = predict(scenario.model, scenario.truth, moments=moments, alpha=config.alpha)
    return scenario, moments, theory


def msd_db_table(report):
    """``(strategy, theory_db, simulated_db, delta_db)`` rows for printing."""
    rows = []
    for s in STRATEGIES:
        sim = report.simulated.get(s)
        rows.append((s, report.theory.msd_db[s], None if sim is None else sim.msd_db,
                     report.deltas.get(s)))
    return rows

