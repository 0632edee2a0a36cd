"""Estimator-style wrappers around the diffusion and fusion-center LMS recursions.

The estimators stream through the rows of ``X`` once per call to ``fit``,
one row per iteration.  Each row holds the regressors of every agent, so
``X`` has shape ``(n_iters, N, M)`` and ``y`` shape ``(n_iters, N)``.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .moments import mean_matrix, perron
from .network import (BernoulliAsyncModel, build_topology, combination_matrices,
                      draw_agent_activity, draw_link_activity)
from .rng import as_generator
from .simulator import DEFAULT_FUSION_T, sample_fusion_vectors


def check_network_data(X, y=None, n_agents=None):
    """Validate stacked agent data, allowing complex entries.

    ``sklearn.utils.check_array`` refuses complex input, hence this helper.

    Returns
    -------
    X : ndarray, shape (n_iters, N, M)
    y : ndarray, shape (n_iters, N) or None
    """
    X = np.asarray(X)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3:
        raise ValueError(f"X must have shape (n_iters, N, M), got {X.shape}")
    if X.shape[0] < 1:
        raise ValueError("X has no rows")
    if not np.issubdtype(X.dtype, np.number):
        raise ValueError(f"X must be numeric, got dtype {X.dtype}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains NaN or infinity")
    if n_agents is not None and X.shape[1] != n_agents:
        raise ValueError(f"X has {X.shape[1]} agents, the network has {n_agents}")
    if y is None:
        return X, None
    y = np.asarray(y)
    if y.shape != X.shape[:2]:
        raise ValueError(f"y must have shape {X.shape[:2]}, got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains NaN or infinity")
    return X, y


class _NetworkLMS(RegressorMixin, BaseEstimator):

    def _model(self):
        topo = build_topology(self.topology)
        return BernoulliAsyncModel.from_topology(topo, q=self.q, eta=self.eta, mu=self.mu)

    def fit(self, X, y):
        """Run the recursion from a zero initial estimate over all rows."""
        for attr in ("coef_", "model_", "rng_"):
            if hasattr(self, attr):
                delattr(self, attr)
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        """Continue the recursion from the current estimate."""
        if not hasattr(self, "model_"):
            self.model_ = self._model()
            self.rng_ = as_generator(self.random_state)
        X, y = check_network_data(X, y, self.model_.n_agents)
        dtype = np.result_type(X.dtype, y.dtype, float)
        if not hasattr(self, "coef_"):
            self.coef_ = np.zeros(self._coef_shape(X), dtype=dtype)
        else:
            self.coef_ = self.coef_.astype(np.result_type(self.coef_.dtype, dtype))
        self._run(X, y)
        self.n_features_in_ = X.shape[2]
        return self

    def score(self, X, y, sample_weight=None):
        """Negative mean squared a-priori error, so that larger is better."""
        X, y = check_network_data(X, y)
        return -float(np.mean(np.abs(y - self.predict(X)) ** 2))


class DiffusionLMS(_NetworkLMS):
    """Adapt-then-combine diffusion LMS over a Bernoulli network.

    Parameters
    ----------
    topology : str or dict
        Topology descriptor such as ``"ring(5)"``.
    mu : float
        Step-size used by an agent when it updates.
    q : float or array-like
        Update probability of each agent.
    eta : float or array-like
        Activation probability of each directed link.
    asynchronous : bool
        If False, agents use ``q_k mu`` and the mean combination matrix at
        every iteration instead of random draws.
    random_state : int, Generator or None
    """

    def __init__(self, topology="ring(5)", mu=0.01, q=1.0, eta=1.0, asynchronous=True,
                 random_state=None):
        self.topology = topology
        self.mu = mu
        self.q = q
        self.eta = eta
        self.asynchronous = asynchronous
        self.random_state = random_state

    def _coef_shape(self, X):
        return X.shape[1:]

    def _run(self, X, y):
        model, rng, w = self.model_, self.rng_, self.coef_
        mu = model.mu_nominal
        if self.asynchronous:
            steps = np.where(draw_agent_activity(model, rng, len(X)), mu, 0.0)
            mats = combination_matrices(model, draw_link_activity(model, rng, len(X)))
        else:
            A_bar = mean_matrix(model)
        for i in range(len(X)):
            u = X[i]
            err = y[i] - np.einsum("nm,nm->n", u, w)
            step = steps[i] if self.asynchronous else model.q * mu
            psi = w + (step * err)[:, None] * u.conj()
            w = (mats[i] if self.asynchronous else A_bar).T @ psi
        self.coef_ = w

    def predict(self, X):
        """Per-agent predictions ``u_k w_k``, shape ``(n, N)``."""
        check_is_fitted(self, "coef_")
        X, _ = check_network_data(X, n_agents=self.coef_.shape[0])
        return np.einsum("tnm,nm->tn", X, self.coef_)


class CentralizedLMS(_NetworkLMS):
    """Fusion-center LMS that weighs each agent's gradient by a fusion coefficient.

    In asynchronous mode the coefficients are a fresh random fusion vector
    per iteration built from ``fusion_t`` combination matrices; otherwise
    they are the Perron vector of the mean combination matrix.
    """

    def __init__(self, topology="ring(5)", mu=0.01, q=1.0, eta=1.0, asynchronous=True,
                 fusion_t=DEFAULT_FUSION_T, random_state=None):
        self.topology = topology
        self.mu = mu
        self.q = q
        self.eta = eta
        self.asynchronous = asynchronous
        self.fusion_t = fusion_t
        self.random_state = random_state

    def _coef_shape(self, X):
        return X.shape[2:]

    def _run(self, X, y):
        model, rng, w = self.model_, self.rng_, self.coef_
        mu = model.mu_nominal
        if self.asynchronous:
            gains = (np.where(draw_agent_activity(model, rng, len(X)), mu, 0.0)
                     * sample_fusion_vectors(model, self.fusion_t, len(X), rng))
        else:
            gains = np.broadcast_to(perron(mean_matrix(model)) * model.q * mu, y.shape)
        for i in range(len(X)):
            err = y[i] - X[i] @ w
            w = w + (gains[i] * err) @ X[i].conj()
        self.coef_ = w

    def predict(self, X):
        """Predictions ``u_k w_c`` for every agent, shape ``(n, N)``."""
        check_is_fitted(self, "coef_")
        X, _ = check_network_data(X)
        return X @ self.coef_
