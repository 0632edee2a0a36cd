"""Streaming linear-regression data: ``d_k(i) = u_{k,i} w_o + xi_k(i)``."""

from dataclasses import dataclass

import numpy as np

from .rng import as_generator


@dataclass(frozen=True, eq=False)
class AgentDataProfile:
    """Regressor covariance and noise variance seen by one agent."""

    R_u: np.ndarray
    sigma_xi2: float

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R_u))
        if R.shape[0] != R.shape[1]:
            raise ValueError(f"R_u must be square, got {R.shape}")
        if not np.allclose(R, R.conj().T, atol=1e-12):
            raise ValueError("R_u must be Hermitian")
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise ValueError("R_u must be positive definite")
        if not self.sigma_xi2 >= 0:
            raise ValueError("sigma_xi2 must be nonnegative")
        object.__setattr__(self, "R_u", R)
        object.__setattr__(self, "sigma_xi2", float(self.sigma_xi2))

    @classmethod
    def white(cls, sigma_u2, sigma_xi2, M):
        return cls(R_u=float(sigma_u2) * np.eye(M), sigma_xi2=sigma_xi2)


@dataclass(frozen=True, eq=False)
class ScenarioTruth:
    """True parameter ``w_o`` shared by all agents plus per-agent data profiles."""

    w_o: np.ndarray
    profiles: tuple

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w_o)).astype(complex)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("w_o must be a nonempty vector")
        object.__setattr__(self, "w_o", w)
        object.__setattr__(self, "profiles", tuple(self.profiles))
        for prof in self.profiles:
            if prof.R_u.shape != (w.size, w.size):
                raise ValueError(f"R_u of shape {prof.R_u.shape} does not match M={w.size}")

    @property
    def M(self):
        return self.w_o.size

    @property
    def n_agents(self):
        return len(self.profiles)

    @property
    def R_u(self):
        """Stacked covariances, shape ``(N, M, M)``."""
        return np.stack([p.R_u for p in self.profiles])

    @property
    def sigma_xi2(self):
        return np.array([p.sigma_xi2 for p in self.profiles])

    def regressor_factors(self):
        """Matrices ``B_k`` with ``B_k^H B_k = R_u,k`` (upper Cholesky factors)."""
        return np.stack([np.linalg.cholesky(p.R_u).conj().T for p in self.profiles])

    def is_real(self):
        return bool(np.all(np.isreal(self.w_o)) and
                    all(np.all(np.isreal(p.R_u)) for p in self.profiles))


def _white(rng, shape, complex_data):
    if complex_data:
        # independent real/imaginary parts with variance 1/2 each
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)
    return rng.standard_normal(shape)


def draw_stream(truth, rng, n_iters, complex_data=True, factors=None):
    """Regressors and observations for ``n_iters`` iterations of all agents.

    Returns
    -------
    u : ndarray, shape (n_iters, N, M)
    d : ndarray, shape (n_iters, N)
    """
    N, M = truth.n_agents, truth.M
    if factors is None:
        factors = truth.regressor_factors()
    z = _white(rng, (n_iters, N, M), complex_data)
    noise = _white(rng, (n_iters, N), complex_data) * np.sqrt(truth.sigma_xi2)
    w_o = truth.w_o
    if not complex_data:
        if not truth.is_real():
            raise ValueError("real-data mode needs a real w_o and real R_u")
        w_o = w_o.real
        factors = factors.real
    u = np.einsum("tnm,nmj->tnj", z, factors)
    d = u @ w_o + noise
    return u, d


def generate_sample(profile, w_o, rng=None, complex_data=True):
    """One ``(u, d)`` pair for a single agent; ``u`` is a length-M row."""
    rng = as_generator(rng)
    truth = ScenarioTruth(w_o=w_o, profiles=(profile,))
    u, d = draw_stream(truth, rng, 1, complex_data=complex_data)
    return u[0, 0], d[0, 0]
