"""Exact moments of the random combination matrix and their Perron vectors.

Vectorisation is column-major throughout: ``vec(X)[i + N*j] = X[i, j]``, so
``kron(B, A) @ vec(X) == vec(A @ X @ B.T)``.  With that convention

    E(A kron A) vec(X) = vec(Abar X Abar^T + sum_k X[k, k] C_k)

where ``C_k`` is the covariance of column ``k`` of ``A``.  Columns of ``A``
are independent under the Bernoulli model, which is what makes the second
moment cheap: only same-column joints need work.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from .errors import EnumerationOverflowError, MatchingViolatedError, NotPrimitiveError
from .network import combination_matrices, draw_link_activity
from .rng import as_generator

ENUMERATION_THRESHOLD = 20
POSITIVITY_FLOOR = 1e-12
DENSE_LIMIT = 40  # largest N for which the N^2 x N^2 matrices are materialised
DENSE_EIG_LIMIT = 256  # above this the leading eigenvector comes from ARPACK


def mean_matrix(model):
    """Expected combination matrix: ``abar_lk = eta_lk a_lk``, diagonal by residual."""
    n = model.n_agents
    src, dst = model.links
    out = np.zeros((n, n))
    out[src, dst] = model.eta * model.a_nominal
    idx = np.arange(n)
    out[idx, idx] = 1.0 - out.sum(axis=0)
    return out


def _column_links(model, k):
    src, dst = model.links
    sel = np.flatnonzero(dst == k)
    return src[sel], model.eta[sel], model.a_nominal[sel]


def column_second_moment(model, k):
    """``E[a a^T]`` for column ``k`` by enumerating its link patterns.

    Returns an ``N x N`` matrix supported on the neighbourhood of ``k``.
    """
    nbrs, eta, weight = _column_links(model, k)
    deg = len(nbrs)
    if deg > ENUMERATION_THRESHOLD:
        raise EnumerationOverflowError(
            f"column {k} has {deg} links (> {ENUMERATION_THRESHOLD})")
    n = model.n_agents
    # every on/off pattern of the column's links, one row per pattern
    patterns = ((np.arange(2 ** deg)[:, None] >> np.arange(deg)) & 1).astype(bool)
    prob = np.prod(np.where(patterns, eta, 1.0 - eta), axis=1)
    values = np.zeros((2 ** deg, deg + 1))
    values[:, :deg] = patterns * weight
    values[:, deg] = 1.0 - values[:, :deg].sum(axis=1)
    local = (values * prob[:, None]).T @ values
    rows = np.append(nbrs, k)
    out = np.zeros((n, n))
    out[np.ix_(rows, rows)] = local
    return out


def column_covariance_analytic(model, k):
    """``Cov(a_k)`` in closed form from the independence of the column's links.

    Link ``l -> k`` contributes ``a_lk^2 eta_lk (1 - eta_lk)`` along the
    direction ``e_l - e_k`` because the diagonal absorbs whatever it drops.
    """
    nbrs, eta, weight = _column_links(model, k)
    v = weight ** 2 * eta * (1.0 - eta)
    n = model.n_agents
    J = np.zeros((n, len(nbrs)))
    J[nbrs, np.arange(len(nbrs))] = 1.0
    J[k, :] -= 1.0
    return (J * v) @ J.T


def column_covariances(model, method="exact", samples=100_000, rng=None):
    """Covariances ``C_k`` of every column, shape ``(N, N, N)`` indexed ``[k]``.

    ``method="exact"`` enumerates link patterns, ``"analytic"`` uses the
    closed form for independent links and ``"mc"`` estimates each column's
    second moment from ``samples`` draws.
    """
    n = model.n_agents
    abar = mean_matrix(model)
    out = np.empty((n, n, n))
    if method == "analytic":
        for k in range(n):
            out[k] = column_covariance_analytic(model, k)
        return out
    if method == "exact":
        for k in range(n):
            out[k] = column_second_moment(model, k) - np.outer(abar[:, k], abar[:, k])
        return out
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    rng = as_generator(rng)
    second = np.zeros((n, n, n))
    remaining = samples
    while remaining:
        batch = min(remaining, max(1, 2_000_000 // (n * n)))
        mats = combination_matrices(model, draw_link_activity(model, rng, batch))
        cols = mats.transpose(2, 0, 1)  # (k, sample, l)
        second += np.matmul(cols.transpose(0, 2, 1), cols)
        remaining -= batch
    second /= samples
    for k in range(n):
        out[k] = second[k] - np.outer(abar[:, k], abar[:, k])
    return out


class SecondMomentOperator:
    """``S = E(A kron A)`` applied in factored form.

    Holds ``Abar`` and the column covariances only, so ``S @ x`` costs
    ``O(N^3)`` and memory ``O(N^3)`` instead of ``O(N^4)``.
    """

    def __init__(self, A_bar, column_cov, samples=None, method=None):
        self.A_bar = np.asarray(A_bar)
        self.column_cov = np.asarray(column_cov)
        self.samples = samples
        self.method = method or ("mc" if samples else "exact")
        n = self.A_bar.shape[0]
        self.shape = (n * n, n * n)

    @property
    def n_agents(self):
        return self.A_bar.shape[0]

    def apply(self, X):
        """``E[A X A^T]`` for an ``N x N`` matrix ``X``."""
        out = self.A_bar @ X @ self.A_bar.T
        out += np.tensordot(np.diagonal(X), self.column_cov, axes=1)
        return out

    def matvec(self, x):
        n = self.n_agents
        X = np.reshape(x, (n, n), order="F")
        return np.reshape(self.apply(X), -1, order="F")

    def __matmul__(self, x):
        return self.matvec(x)

    def todense(self):
        n = self.n_agents
        S = np.kron(self.A_bar, self.A_bar)
        diag_cols = np.arange(n) * (n + 1)
        for k in range(n):
            S[:, diag_cols[k]] += np.reshape(self.column_cov[k], -1, order="F")
        return S


def second_moment_operator(model, method="auto", samples=100_000, rng=None):
    """Factored ``E(A kron A)``.

    ``"auto"`` enumerates link patterns while every column has at most
    :data:`ENUMERATION_THRESHOLD` links and switches to the closed form above.
    """
    if method == "auto":
        max_deg = int(model.topology.degrees.max()) - 1
        method = "exact" if max_deg <= ENUMERATION_THRESHOLD else "analytic"
    cov = column_covariances(model, method=method, samples=samples, rng=rng)
    return SecondMomentOperator(mean_matrix(model), cov,
                                samples=samples if method == "mc" else None, method=method)


def second_moment(model, method="auto", samples=100_000, rng=None):
    """Dense ``N^2 x N^2`` matrix ``S = E(A_i kron A_i)``."""
    return second_moment_operator(model, method, samples, rng).todense()


def is_primitive(pattern):
    """True if the nonnegative pattern is irreducible and aperiodic."""
    pattern = np.asarray(pattern, dtype=bool)
    n = pattern.shape[0]
    if n == 1:
        return bool(pattern[0, 0])
    graph = csr_matrix(pattern.astype(np.int8))
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    if n_comp != 1:
        return False
    if np.any(np.diag(pattern)):
        return True
    # period = gcd of (level[u] + 1 - level[v]) over edges u -> v
    order, pred = breadth_first_order(graph, 0, directed=True)
    level = np.zeros(n, dtype=int)
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    rows, cols = np.nonzero(pattern)
    period = 0
    for d in level[rows] + 1 - level[cols]:
        period = math.gcd(period, int(abs(d)))
    return period == 1


def _check_stochastic(matrix, atol=1e-10):
    if np.any(matrix < -atol):
        raise NotPrimitiveError("matrix has negative entries")
    if np.max(np.abs(matrix.sum(axis=0) - 1.0)) > atol:
        raise NotPrimitiveError("matrix is not left-stochastic")


def perron(matrix, tol=1e-12, max_iter=200_000, x0=None):
    """Perron vector of a primitive left-stochastic matrix by power iteration.

    Parameters
    ----------
    matrix : ndarray or SecondMomentOperator
        ``D x D`` nonnegative matrix whose columns sum to one.
    tol : float
        Stop when ``||M x - x||_inf <= tol``.
    max_iter : int
    x0 : ndarray, optional
        Positive starting vector; uniform by default.

    Returns
    -------
    x : ndarray
        Positive vector with ``M x = x`` and ``sum(x) == 1``.
    """
    if isinstance(matrix, SecondMomentOperator):
        _check_stochastic(matrix.A_bar)
        # supp E(A kron A) = supp(Abar kron Abar); kron of primitives is primitive
        if not is_primitive(matrix.A_bar > 0):
            raise NotPrimitiveError("mean matrix is not primitive")
        dim = matrix.shape[0]
        apply = matrix.matvec
    else:
        matrix = np.asarray(matrix, dtype=float)
        _check_stochastic(matrix)
        if not is_primitive(matrix > 0):
            raise NotPrimitiveError(f"{matrix.shape[0]}x{matrix.shape[0]} input is reducible or periodic")
        dim = matrix.shape[0]
        apply = matrix.__matmul__

    x = np.full(dim, 1.0 / dim) if x0 is None else np.asarray(x0, dtype=float) / np.sum(x0)
    # a direct eigensolve first: plain power iteration crawls when the
    # second eigenvalue is close to one, which is common on sparse graphs
    x = _leading_vector(matrix, apply, dim, x)
    for _ in range(max_iter):
        y = apply(x)
        y /= y.sum()
        if np.max(np.abs(y - x)) <= tol:
            x = y
            break
        x = y
    else:
        raise NotPrimitiveError(f"power iteration did not converge in {max_iter} steps")
    if np.min(x) <= POSITIVITY_FLOOR:
        raise NotPrimitiveError(f"fixed point has entry {np.min(x):.3e}")
    return x


def _leading_vector(matrix, apply, dim, x0):
    """Eigenvector of the eigenvalue of largest modulus, scaled to sum one.

    Falls back to ``x0`` when the solver fails or the result is not a
    usable starting point; the caller's power iteration then does the work.
    """
    try:
        if dim <= DENSE_EIG_LIMIT:
            dense = matrix.todense() if isinstance(matrix, SecondMomentOperator) else matrix
            vals, vecs = np.linalg.eig(dense)
            v = vecs[:, np.argmax(np.abs(vals))]
        elif dim >= 3:
            op = LinearOperator((dim, dim), matvec=apply, dtype=float)
            _, vecs = eigs(op, k=1, which="LM", v0=x0, tol=1e-14, maxiter=10 * dim)
            v = vecs[:, 0]
        else:
            return x0
    except (ArpackNoConvergence, np.linalg.LinAlgError):
        return x0
    v = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
    if abs(v.sum()) < 1e-300:
        return x0
    v = v / v.sum()
    return v if np.all(np.isfinite(v)) else x0


def _joint_perron(S, x0=None):
    p = perron(S, x0=x0)
    n = math.isqrt(p.size)
    P = np.reshape(p, (n, n), order="F")
    asym = float(np.max(np.abs(P - P.T)))
    P = 0.5 * (P + P.T)
    return np.reshape(P, -1, order="F"), P, asym


def joint_perron(S):
    """Perron vector ``p`` of ``S`` and ``P_p = unvec(p)``, symmetrised."""
    p, P, _ = _joint_perron(S)
    return p, P


@dataclass(frozen=True, eq=False)
class FusionMoments:
    """Mean ``pi_bar`` and covariance ``C_pi`` of the random fusion vector."""

    pi_bar: np.ndarray
    C_pi: np.ndarray

    @property
    def second(self):
        """``E[pi pi^T] = C_pi + pi_bar pi_bar^T``."""
        return self.C_pi + np.outer(self.pi_bar, self.pi_bar)


def fusion_moments(p_bar, P_p, row_tol=1e-10, psd_tol=1e-9):
    """Fusion moments matched to a distributed network.

    Sets ``pi_bar = p_bar`` and ``C_pi = P_p - p_bar p_bar^T`` and checks that
    the result is a valid covariance of a simplex-valued vector.
    """
    p_bar = np.asarray(p_bar, dtype=float)
    C = np.asarray(P_p, dtype=float) - np.outer(p_bar, p_bar)
    C = 0.5 * (C + C.T)
    row = float(np.max(np.abs(C.sum(axis=1))))
    if row > row_tol:
        raise MatchingViolatedError(f"||C_pi 1||_inf = {row:.3e} > {row_tol:g}")
    low = float(np.linalg.eigvalsh(C)[0])
    if low < -psd_tol:
        raise MatchingViolatedError(f"min eig(C_pi) = {low:.3e} < -{psd_tol:g}")
    return FusionMoments(pi_bar=p_bar.copy(), C_pi=C)


@dataclass(frozen=True, eq=False)
class MomentSet:
    """First/second moments of ``A_i`` and their Perron vectors.

    ``S`` and ``C_A`` are ``None`` when ``N`` exceeds :data:`DENSE_LIMIT`;
    ``operator`` always holds the factored second moment.
    """

    A_bar: np.ndarray
    p_bar: np.ndarray
    P_p: np.ndarray
    S: np.ndarray = None
    C_A: np.ndarray = None
    operator: SecondMomentOperator = field(default=None, repr=False)
    residual_mean: float = float("nan")
    residual_joint: float = float("nan")
    asymmetry: float = 0.0
    method: str = "exact"
    samples: int = None

    @property
    def p(self):
        return np.reshape(self.P_p, -1, order="F")

    @property
    def C_p(self):
        return self.P_p - np.outer(self.p_bar, self.p_bar)

    @property
    def n_agents(self):
        return self.A_bar.shape[0]

    def fusion(self):
        return fusion_moments(self.p_bar, self.P_p)

    def to_dict(self):
        def mat(x):
            return None if x is None else np.asarray(x).tolist()

        return {
            "n_agents": self.n_agents,
            "method": self.method,
            "samples": self.samples,
            "A_bar": mat(self.A_bar),
            "p_bar": mat(self.p_bar),
            "P_p": mat(self.P_p),
            "C_p": mat(self.C_p),
            "S": mat(self.S),
            "C_A": mat(self.C_A),
            "residual_mean": self.residual_mean,
            "residual_joint": self.residual_joint,
            "asymmetry": self.asymmetry,
        }

    @classmethod
    def from_dict(cls, doc):
        def arr(key):
            val = doc.get(key)
            return None if val is None else np.asarray(val, dtype=float)

        return cls(A_bar=arr("A_bar"), p_bar=arr("p_bar"), P_p=arr("P_p"),
                   S=arr("S"), C_A=arr("C_A"),
                   residual_mean=doc.get("residual_mean", float("nan")),
                   residual_joint=doc.get("residual_joint", float("nan")),
                   asymmetry=doc.get("asymmetry", 0.0),
                   method=doc.get("method", "exact"), samples=doc.get("samples"))


def compute_moments(model, method="auto", samples=100_000, rng=None, dense=None):
    """Build the full :class:`MomentSet` for a Bernoulli model."""
    op = second_moment_operator(model, method=method, samples=samples, rng=rng)
    A_bar = op.A_bar
    p_bar = perron(A_bar)
    # p_bar kron p_bar is the exact answer when A is deterministic and close otherwise
    p, P_p, asym = _joint_perron(op, x0=np.kron(p_bar, p_bar))
    n = model.n_agents
    if dense is None:
        dense = n <= DENSE_LIMIT
    S = op.todense() if dense else None
    C_A = S - np.kron(A_bar, A_bar) if dense else None
    return MomentSet(
        A_bar=A_bar, p_bar=p_bar, P_p=P_p, S=S, C_A=C_A, operator=op,
        residual_mean=float(np.max(np.abs(A_bar @ p_bar - p_bar))),
        residual_joint=float(np.max(np.abs(op.matvec(p) - p))),
        asymmetry=asym, method=op.method, samples=op.samples)
