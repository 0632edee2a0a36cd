"""Agent graphs and the Bernoulli asynchronous network model.

Agents are indexed ``0..N-1``.  A combination matrix ``A`` is left-stochastic:
column ``k`` holds the weights agent ``k`` applies to the intermediate
estimates of its neighbours, so ``A[l, k] != 0`` only when ``l`` is in the
neighbourhood of ``k``.
"""

import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

from .errors import EmptyNetworkError, UnconnectedTopologyError
from .rng import as_generator, stream

RGG_RETRIES = 200


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected connected graph with self-inclusive neighbourhoods.

    Parameters
    ----------
    n_agents : int
        Number of agents ``N``.
    edges : tuple of (int, int)
        Undirected links ``(l, k)`` with ``l < k``; self-loops are implicit.
    """

    n_agents: int
    edges: tuple
    descriptor: dict = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_agents < 1:
            raise EmptyNetworkError("a topology needs at least one agent")
        clean = set()
        for l, k in self.edges:
            l, k = int(l), int(k)
            if not (0 <= l < self.n_agents and 0 <= k < self.n_agents):
                raise ValueError(f"edge ({l}, {k}) references an unknown agent")
            if l != k:
                clean.add((min(l, k), max(l, k)))
        object.__setattr__(self, "edges", tuple(sorted(clean)))
        if not _is_connected(self.n_agents, self.edges):
            raise UnconnectedTopologyError(
                f"{self.n_agents} agents, {len(self.edges)} links")

    @cached_property
    def neighborhoods(self):
        """Tuple of frozensets; ``neighborhoods[k]`` always contains ``k``."""
        nbrs = [{k} for k in range(self.n_agents)]
        for l, k in self.edges:
            nbrs[l].add(k)
            nbrs[k].add(l)
        return tuple(frozenset(s) for s in nbrs)

    @property
    def degrees(self):
        """Neighbourhood sizes ``|N_k|`` (self included)."""
        return np.array([len(s) for s in self.neighborhoods])

    def adjacency(self):
        """Boolean ``N x N`` pattern including the diagonal."""
        adj = np.eye(self.n_agents, dtype=bool)
        for l, k in self.edges:
            adj[l, k] = adj[k, l] = True
        return adj

    def directed_links(self):
        """Arrays ``(src, dst)`` of all links ``l -> k`` with ``l != k``.

        Ordered by destination column, then source; this is the order in
        which link activations are drawn.
        """
        return self._links

    @cached_property
    def _links(self):
        src, dst = [], []
        for k, nbrs in enumerate(self.neighborhoods):
            for l in sorted(nbrs - {k}):
                src.append(l)
                dst.append(k)
        src = np.array(src, dtype=np.intp)
        dst = np.array(dst, dtype=np.intp)
        src.setflags(write=False)
        dst.setflags(write=False)
        return src, dst


def _is_connected(n, edges):
    if n == 1:
        return True
    if not edges:
        return False
    rows, cols = zip(*edges)
    graph = csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(n, n))
    n_comp, _ = connected_components(graph, directed=False)
    return n_comp == 1


_CALL = re.compile(r"^\s*([a-z\-_]+)\s*\(([^)]*)\)\s*$")


def parse_descriptor(spec):
    """Normalise a topology descriptor to a dict.

    Accepts dicts (``{"kind": "ring", "n_agents": 5}``) or the shorthand
    strings ``"ring(5)"``, ``"full(4)"`` and
    ``"random-geometric(20, 0.4, 3)"`` (agents, radius, seed).
    """
    if isinstance(spec, dict):
        out = dict(spec)
        out["kind"] = str(out.get("kind", "")).replace("_", "-")
        return out
    if isinstance(spec, str):
        m = _CALL.match(spec)
        if not m:
            raise ValueError(f"cannot parse topology descriptor {spec!r}")
        kind = m.group(1).replace("_", "-")
        args = [a.strip() for a in m.group(2).split(",") if a.strip()]
        out = {"kind": kind}
        if kind in ("ring", "full", "line"):
            out["n_agents"] = int(args[0])
        elif kind in ("random-geometric", "rgg"):
            out["kind"] = "random-geometric"
            out["n_agents"] = int(args[0])
            out["radius"] = float(args[1])
            if len(args) > 2:
                out["seed"] = int(args[2])
        else:
            raise ValueError(f"unknown topology kind {kind!r}")
        return out
    raise TypeError(f"topology descriptor must be a dict or str, got {type(spec).__name__}")


def build_topology(spec):
    """Build a :class:`Topology` from an edge list, ring, full or RGG descriptor."""
    desc = parse_descriptor(spec)
    kind = desc["kind"]
    n = int(desc.get("n_agents", 0))
    if n < 1:
        raise EmptyNetworkError("n_agents must be >= 1")

    if kind == "full":
        edges = [(l, k) for l in range(n) for k in range(l + 1, n)]
    elif kind == "ring":
        edges = [(k, (k + 1) % n) for k in range(n)] if n > 1 else []
    elif kind == "line":
        edges = [(k, k + 1) for k in range(n - 1)]
    elif kind in ("edges", "edge-list"):
        edges = [tuple(e) for e in desc["edges"]]
    elif kind == "random-geometric":
        edges = _random_geometric_edges(n, float(desc["radius"]),
                                        int(desc.get("seed", 0)))
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return Topology(n, tuple(edges), descriptor=desc)


def _random_geometric_edges(n, radius, seed):
    if n == 1:
        return []
    for attempt in range(RGG_RETRIES):
        pos = stream(seed, "rgg", attempt).random((n, 2))
        close = squareform(pdist(pos)) <= radius
        edges = [(l, k) for l, k in zip(*np.nonzero(np.triu(close, 1)))]
        if _is_connected(n, edges):
            return [(int(l), int(k)) for l, k in edges]
    raise UnconnectedTopologyError(
        f"no connected random-geometric graph with N={n}, radius={radius} "
        f"after {RGG_RETRIES} draws")


def nominal_weights(topology):
    """Per-link nominal weights ``a_lk = 1/|N_k|`` for ``l`` in ``N_k \\ {k}``.

    Returns a dict keyed by ``(l, k)``.  Diagonal weights are not stored; a
    realization sets them to whatever keeps the column summing to one.
    """
    deg = topology.degrees
    src, dst = topology.directed_links()
    return {(int(l), int(k)): 1.0 / deg[k] for l, k in zip(src, dst)}


def _link_values(topology, value, name):
    """Expand a scalar, per-link array, N x N matrix or dict to link order."""
    src, dst = topology.directed_links()
    n_links = len(src)
    if isinstance(value, dict):
        return np.array([float(value[(int(l), int(k))]) for l, k in zip(src, dst)])
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n_links, float(arr))
    if arr.shape == (n_links,):
        return arr.copy()
    n = topology.n_agents
    if arr.shape == (n, n):
        return arr[src, dst].copy()
    raise ValueError(f"{name} has shape {arr.shape}; expected scalar, "
                     f"({n_links},) or ({n}, {n})")


def _agent_values(n, value, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} has shape {arr.shape}; expected scalar or ({n},)")
    return arr.copy()


@dataclass(frozen=True, eq=False)
class BernoulliAsyncModel:
    """Agents update with probability ``q_k``; links fire with probability ``eta_lk``.

    Parameters
    ----------
    topology : Topology
    q : array, shape (N,)
        Update probability of each agent, in ``(0, 1]``.
    eta : array, shape (L,)
        Activation probability of each directed link, in
        ``Topology.directed_links()`` order, in ``(0, 1]``.
    mu_nominal : array, shape (N,)
        Step-size an agent uses when it is on.
    a_nominal : array, shape (L,)
        Weight of a link when it is active.
    """

    topology: Topology
    q: np.ndarray
    eta: np.ndarray
    mu_nominal: np.ndarray
    a_nominal: np.ndarray

    def __post_init__(self):
        n = self.topology.n_agents
        n_links = len(self.topology.directed_links()[0])
        for name, arr, size in (("q", self.q, n), ("eta", self.eta, n_links),
                                ("mu_nominal", self.mu_nominal, n),
                                ("a_nominal", self.a_nominal, n_links)):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (size,):
                raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any((self.q <= 0) | (self.q > 1)):
            raise ValueError("q must lie in (0, 1]")
        if np.any((self.eta <= 0) | (self.eta > 1)):
            raise ValueError("eta must lie in (0, 1]")
        if np.any(self.mu_nominal < 0):
            raise ValueError("mu_nominal must be nonnegative")
        if np.any(self.a_nominal < 0):
            raise ValueError("a_nominal must be nonnegative")
        _, dst = self.topology.directed_links()
        col = np.bincount(dst, weights=self.a_nominal, minlength=n)
        if np.any(col > 1 + 1e-12):
            raise ValueError("nominal link weights of a column exceed one")

    @classmethod
    def from_topology(cls, topology, q=1.0, eta=1.0, mu=0.01, a_nominal=None):
        """Build a model with ``a_lk = 1/|N_k|`` unless weights are given.

        ``q`` and ``mu`` may be scalars or length-N arrays; ``eta`` may be a
        scalar, a per-link array, an N x N matrix or a ``{(l, k): eta}`` dict.
        """
        n = topology.n_agents
        if a_nominal is None:
            a = nominal_weights(topology)
        else:
            a = a_nominal
        return cls(topology=topology,
                   q=_agent_values(n, q, "q"),
                   eta=_link_values(topology, eta, "eta"),
                   mu_nominal=_agent_values(n, mu, "mu"),
                   a_nominal=_link_values(topology, a, "a_nominal"))

    @property
    def n_agents(self):
        return self.topology.n_agents

    @property
    def links(self):
        return self.topology.directed_links()

    @property
    def is_deterministic(self):
        return bool(np.all(self.q == 1) and np.all(self.eta == 1))

    def eta_matrix(self):
        out = np.zeros((self.n_agents, self.n_agents))
        src, dst = self.links
        out[src, dst] = self.eta
        return out

    def with_mu(self, mu):
        """Copy of the model with a different nominal step-size."""
        return BernoulliAsyncModel(self.topology, self.q, self.eta,
                                   _agent_values(self.n_agents, mu, "mu"),
                                   self.a_nominal)


@dataclass(frozen=True, eq=False)
class CombinationRealization:
    """One draw of the random combination matrix and step-sizes."""

    matrix: np.ndarray
    step_sizes: np.ndarray


def draw_link_activity(model, rng, size=()):
    """Boolean activations with shape ``size + (L,)``."""
    shape = tuple(np.atleast_1d(size)) if size != () else ()
    return rng.random(shape + (len(model.eta),)) < model.eta


def draw_agent_activity(model, rng, size=()):
    """Boolean on/off flags with shape ``size + (N,)``."""
    shape = tuple(np.atleast_1d(size)) if size != () else ()
    return rng.random(shape + (model.n_agents,)) < model.q


def combination_matrices(model, active):
    """Left-stochastic matrices for link activations of shape ``(..., L)``.

    Each active link contributes its nominal weight; the diagonal absorbs
    whatever the inactive links would have carried.
    """
    active = np.asarray(active, dtype=bool)
    n = model.n_agents
    src, dst = model.links
    lead = active.shape[:-1]
    weights = np.where(active, model.a_nominal, 0.0)
    mats = np.zeros(lead + (n, n))
    mats[..., src, dst] = weights
    off = mats.sum(axis=-2)
    idx = np.arange(n)
    mats[..., idx, idx] = 1.0 - off
    return mats


def sample_realization(model, rng=None):
    """Draw ``(A_i, mu(i))`` under the Bernoulli model.

    Links and agents are independent of each other and of past draws.
    Link activations are drawn before agent flags.
    """
    rng = as_generator(rng)
    active = draw_link_activity(model, rng)
    on = draw_agent_activity(model, rng)
    return CombinationRealization(matrix=combination_matrices(model, active),
                                  step_sizes=np.where(on, model.mu_nominal, 0.0))


def combine_vectors(model, active, values):
    """Apply ``A`` (from ``active``) to vectors: returns ``A @ values``.

    ``active`` has shape ``(..., L)`` and ``values`` shape ``(..., N)``.
    Cheaper than forming the matrices when only ``A v`` is needed.
    """
    _, dst = model.links
    flow = np.where(active, model.a_nominal, 0.0) * values[..., dst]
    return values + flow @ _incidence(model)


def _incidence(model):
    inc = getattr(model, "_incidence_cache", None)
    if inc is None:
        src, dst = model.links
        inc = np.zeros((len(src), model.n_agents))
        inc[np.arange(len(src)), src] += 1.0
        inc[np.arange(len(src)), dst] -= 1.0
        object.__setattr__(model, "_incidence_cache", inc)
    return inc


def degree_summary(topology):
    deg = topology.degrees - 1
    return {"min": int(deg.min()), "max": int(deg.max()),
            "mean": float(deg.mean()), "links": len(topology.edges),
            "density": 2 * len(topology.edges) / max(1, topology.n_agents * (topology.n_agents - 1))}

