"""Closed-form rate and steady-state MSD predictions.

Everything here works in the augmented ``2M`` representation where the
Hessian of agent ``k`` is ``H_k = diag(R_u,k, R_u,k^T)`` and its gradient-noise
covariance at the optimum is ``R_k = sigma_xi,k^2 H_k``.  Network quantities
weight these per-agent terms with Perron-vector entries:

    H       = sum_k pbar_k mubar_k H_k
    R_sync  = sum_k pbar_k^2 mubar_k^2 R_k
    R_async = sum_k p_kk (mubar_k^2 + c_mu,k) R_k
    MSD     = Tr(H^-1 R) / 4
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import eigs

from .errors import DimensionGuardError, SingularCovarianceError, SingularMatrixError
from .moments import compute_moments, fusion_moments
from .network import combination_matrices, draw_agent_activity, draw_link_activity
from .rng import as_generator

MC_DIM_LIMIT = 64


def db(x):
    return 10.0 * math.log10(x)


@dataclass(frozen=True, eq=False)
class StepSizeMoments:
    """Bernoulli step-size moments: ``E mu_k(i)^m = q_k mu_k^m``."""

    mu_bar: np.ndarray
    mu2_bar: np.ndarray
    mu4_bar: np.ndarray
    c_mu_diag: np.ndarray

    @property
    def nu(self):
        return float(np.max(np.sqrt(self.mu4_bar) / self.mu_bar))


def step_size_moments(model):
    q, mu = model.q, model.mu_nominal
    return StepSizeMoments(mu_bar=q * mu, mu2_bar=q * mu ** 2, mu4_bar=q * mu ** 4,
                           c_mu_diag=q * (1.0 - q) * mu ** 2)


@dataclass(frozen=True)
class StabilityReport:
    ms_stable: bool
    fourth_stable: bool
    nu: float
    alpha: float
    necessary_only: bool


def stability_check(moments, truth, alpha=0.0):
    """Per-agent mean-square and fourth-order step-size conditions.

    With ``alpha == 0`` (the gradient-noise constant is unknown) the
    conditions are necessary but not sufficient; a warning says so.
    """
    eig = np.array([np.linalg.eigvalsh(R)[[0, -1]] for R in truth.R_u])
    lam_min, lam_max = eig[:, 0], eig[:, 1]
    ms = moments.mu2_bar / moments.mu_bar < lam_min / (lam_max ** 2 + alpha)
    fourth = np.sqrt(moments.mu4_bar) / moments.mu_bar < lam_min / (3 * lam_max ** 2 + 4 * alpha)
    if alpha == 0:
        warnings.warn("alpha = 0: stability conditions are necessary only",
                      stacklevel=2)
    return StabilityReport(ms_stable=bool(np.all(ms)), fourth_stable=bool(np.all(fourth)),
                           nu=moments.nu, alpha=float(alpha), necessary_only=alpha == 0)


def hessians(truth):
    """``H_k = diag(R_u,k, R_u,k^T)``, shape ``(N, 2M, 2M)``."""
    R = truth.R_u.astype(complex)
    N, M = R.shape[:2]
    H = np.zeros((N, 2 * M, 2 * M), dtype=complex)
    H[:, :M, :M] = R
    H[:, M:, M:] = np.transpose(R, (0, 2, 1))
    return H


def noise_covariances(truth):
    """``R_k = sigma_xi,k^2 H_k``."""
    return truth.sigma_xi2[:, None, None] * hessians(truth)


def build_H(p_bar, moments, truth):
    H = np.tensordot(np.asarray(p_bar) * moments.mu_bar, hessians(truth), axes=1)
    if np.linalg.eigvalsh(H)[0] <= 0:
        raise SingularMatrixError("H is not positive definite")
    return H


def build_R_sync(p_bar, moments, truth):
    w = np.asarray(p_bar) ** 2 * moments.mu_bar ** 2
    return np.tensordot(w, noise_covariances(truth), axes=1)


def build_R_async(P_p, moments, truth):
    w = np.diag(P_p) * (moments.mu_bar ** 2 + moments.c_mu_diag)
    return np.tensordot(w, noise_covariances(truth), axes=1)


def build_H_c(fusion, moments, truth):
    """Centralized Hessian ``sum_k pibar_k mubar_k H_k``."""
    return build_H(fusion.pi_bar, moments, truth)


def build_R_c(fusion, moments, truth):
    """Centralized noise term ``sum_k (pibar_k^2 + c_pi,kk)(mubar_k^2 + c_mu,k) R_k``."""
    w = (fusion.pi_bar ** 2 + np.diag(fusion.C_pi)) * (moments.mu_bar ** 2 + moments.c_mu_diag)
    return np.tensordot(w, noise_covariances(truth), axes=1)


def build_R_c_sync(fusion, moments, truth):
    return build_R_sync(fusion.pi_bar, moments, truth)


def _mean_D(moments, truth):
    H = hessians(truth)
    eye = np.eye(H.shape[1])
    return eye - moments.mu_bar[:, None, None] * H, H


def build_F_sync(p_bar, moments, truth):
    """``sum_{l,k} pbar_l pbar_k (Dbar_l^T kron Dbar_k) = Bbar^T kron Bbar``."""
    D, _ = _mean_D(moments, truth)
    B = np.tensordot(np.asarray(p_bar), D, axes=1)
    return np.kron(B.T, B)


def build_F_async(P_p, moments, truth):
    """``sum_{l,k} p_lk (Dbar_l^T kron Dbar_k) + sum_k p_kk c_mu,k (H_k^T kron H_k)``."""
    D, H = _mean_D(moments, truth)
    P_p = np.asarray(P_p)
    F = 0
    for l in range(len(D)):
        F = F + np.kron(D[l].T, np.tensordot(P_p[l], D, axes=1))
        F = F + P_p[l, l] * moments.c_mu_diag[l] * np.kron(H[l].T, H[l])
    return F


def build_F_c(fusion, moments, truth):
    """Centralized operator with ``E[pi_l pi_k] = pibar_l pibar_k + c_pi,lk``."""
    return build_F_async(fusion.second, moments, truth)


def spectral_radius(F):
    F = np.asarray(F)
    if F.shape[0] > 1024:
        return float(np.abs(eigs(F, k=1, which="LM", return_eigenvectors=False)[0]))
    return float(np.max(np.abs(np.linalg.eigvals(F))))


def msd_general(H, R):
    """``Tr(H^{-1} R) / 4`` in linear scale."""
    H = np.asarray(H)
    if np.linalg.eigvalsh(H)[0] <= 0:
        raise SingularMatrixError("H is not positive definite")
    return float(np.trace(np.linalg.solve(H, R)).real / 4.0)


def _uniform_mu(model):
    mu = model.mu_nominal
    if not np.all(mu == mu[0]):
        raise ValueError("the LMS closed forms assume a uniform nominal step-size")
    return float(mu[0])


def _lms_msd(weights_H, weights_R, mu, truth):
    R_u = truth.R_u
    A = np.tensordot(weights_H, R_u, axes=1)
    B = np.tensordot(weights_R * truth.sigma_xi2, R_u, axes=1)
    try:
        X = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(str(exc)) from None
    if np.linalg.eigvalsh(A)[0] <= 0:
        raise SingularCovarianceError("aggregate regressor covariance is not PD")
    return float(0.5 * mu * np.trace(X).real)


def msd_lms_async(p_bar, P_p, model, truth):
    """``(mu/2) Tr[(sum pbar_k q_k R_u,k)^-1 (sum p_kk q_k s_k R_u,k)]``."""
    mu = _uniform_mu(model)
    return _lms_msd(np.asarray(p_bar) * model.q, np.diag(P_p) * model.q, mu, truth)


def msd_lms_sync(p_bar, model, truth):
    """``(mu/2) Tr[(sum pbar_k q_k R_u,k)^-1 (sum pbar_k^2 q_k^2 s_k R_u,k)]``."""
    mu = _uniform_mu(model)
    p_bar = np.asarray(p_bar)
    return _lms_msd(p_bar * model.q, p_bar ** 2 * model.q ** 2, mu, truth)


STRATEGIES = ("dist_async", "dist_sync", "cent_async", "cent_sync")


@dataclass(frozen=True, eq=False)
class TheoryReport:
    """Rates and MSD predictions for one model/scenario pair."""

    nu: float
    H: np.ndarray
    R_sync: np.ndarray
    R_async: np.ndarray
    F_sync: np.ndarray
    F_async: np.ndarray
    rho_mean: float
    rho_ms_sync: float
    rho_ms_async: float
    msd: dict
    msd_lms: dict
    stability: StabilityReport
    moments: object = field(default=None, repr=False)

    @property
    def msd_db(self):
        return {k: db(v) for k, v in self.msd.items()}

    @property
    def ms_stable(self):
        return self.rho_ms_async < 1 and self.rho_ms_sync < 1

    def to_dict(self):
        return {
            "nu": self.nu,
            "rho_mean": self.rho_mean,
            "rho_ms_sync": self.rho_ms_sync,
            "rho_ms_async": self.rho_ms_async,
            "msd_db": {k: self.msd_db[k] for k in STRATEGIES},
            "msd_linear": {k: self.msd[k] for k in STRATEGIES},
            "msd_lms_closed_form": dict(self.msd_lms),
            "stability": {
                "ms_stable": self.stability.ms_stable,
                "fourth_stable": self.stability.fourth_stable,
                "alpha": self.stability.alpha,
                "necessary_only": self.stability.necessary_only,
                "unstable_operator": not self.ms_stable,
            },
        }


def predict(model, truth, moments=None, alpha=0.0):
    """Assemble the full :class:`TheoryReport`."""
    if moments is None:
        moments = compute_moments(model)
    sm = step_size_moments(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        stab = stability_check(sm, truth, alpha)
    fusion = fusion_moments(moments.p_bar, moments.P_p)

    H = build_H(moments.p_bar, sm, truth)
    R_sync = build_R_sync(moments.p_bar, sm, truth)
    R_async = build_R_async(moments.P_p, sm, truth)
    F_sync = build_F_sync(moments.p_bar, sm, truth)
    F_async = build_F_async(moments.P_p, sm, truth)

    H_c = build_H_c(fusion, sm, truth)
    msd = {
        "dist_async": msd_general(H, R_async),
        "dist_sync": msd_general(H, R_sync),
        "cent_async": msd_general(H_c, build_R_c(fusion, sm, truth)),
        "cent_sync": msd_general(H_c, build_R_c_sync(fusion, sm, truth)),
    }
    msd_lms = {}
    if np.all(model.mu_nominal == model.mu_nominal[0]):
        msd_lms = {"async": msd_lms_async(moments.p_bar, moments.P_p, model, truth),
                   "sync": msd_lms_sync(moments.p_bar, model, truth)}
    return TheoryReport(
        nu=sm.nu, H=H, R_sync=R_sync, R_async=R_async, F_sync=F_sync, F_async=F_async,
        rho_mean=float(1.0 - np.linalg.eigvalsh(H)[0]),
        rho_ms_sync=spectral_radius(F_sync), rho_ms_async=spectral_radius(F_async),
        msd=msd, msd_lms=msd_lms, stability=stab, moments=moments)


@dataclass(frozen=True)
class FullOperatorEstimate:
    rho_hat: float
    stderr: float
    samples: int


def _network_operators(model, truth, active, on):
    """``B_s = (A_s kron I)^T (I - M_s Hcal)`` for a batch of draws."""
    N, twoM = model.n_agents, 2 * truth.M
    H = hessians(truth)
    A = combination_matrices(model, active)
    mu = np.where(on, model.mu_nominal, 0.0)
    eye = np.eye(twoM)
    S = len(A)
    # block-diagonal I - mu_k H_k
    inner = np.zeros((S, N * twoM, N * twoM), dtype=complex)
    for k in range(N):
        sl = slice(k * twoM, (k + 1) * twoM)
        inner[:, sl, sl] = eye - mu[:, k, None, None] * H[k]
    big_A = np.einsum("slk,ij->slikj", A, eye).reshape(S, N * twoM, N * twoM)
    return np.einsum("sba,sbc->sac", big_A, inner)


def estimate_full_F_mc(model, truth, samples=10_000, rng=None, batches=20, n_boot=200):
    """Monte Carlo estimate of ``rho(E[B^T kron conj(B)])`` for the full network.

    The ``(N 2M)^2``-dimensional operator is averaged over ``samples`` draws
    of ``(A_i, mu(i))``; the standard error comes from a bootstrap over
    ``batches`` equal batch means.
    """
    dim = model.n_agents * 2 * truth.M
    if dim > MC_DIM_LIMIT:
        raise DimensionGuardError(f"N*2M = {dim} > {MC_DIM_LIMIT}")
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = as_generator(rng)
    # cap memory of the stored batch means at roughly 200 MB
    batches = max(2, min(batches, int(2e8 // (16 * dim ** 4))))
    per_batch = samples // batches
    G = np.zeros((batches, dim * dim, dim * dim), dtype=complex)
    for b in range(batches):
        n = per_batch + (1 if b < samples % batches else 0)
        active = draw_link_activity(model, rng, n)
        on = draw_agent_activity(model, rng, n)
        V = _network_operators(model, truth, active, on).reshape(n, dim * dim)
        G[b] = V.T @ V.conj() / n

    def to_operator(g):
        # g[(j,i),(k,l)] = E B_ji conj(B_kl)  ->  F[(i,k),(j,l)]
        return g.reshape(dim, dim, dim, dim).transpose(1, 2, 0, 3).reshape(dim * dim, dim * dim)

    counts = np.array([per_batch + (1 if b < samples % batches else 0) for b in range(batches)])
    weights = counts / counts.sum()
    rho_hat = spectral_radius(to_operator(np.tensordot(weights, G, axes=1)))
    if np.ptp(G.reshape(batches, -1), axis=0).max() == 0:
        return FullOperatorEstimate(rho_hat=rho_hat, stderr=0.0, samples=samples)
    boot = np.empty(n_boot)
    for r in range(n_boot):
        pick = rng.integers(0, batches, batches)
        w = counts[pick] / counts[pick].sum()
        boot[r] = spectral_radius(to_operator(np.tensordot(w, G[pick], axes=1)))
    return FullOperatorEstimate(rho_hat=rho_hat, stderr=float(boot.std(ddof=1)),
                                samples=samples)
