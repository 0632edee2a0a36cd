"""Monte Carlo runs of the four LMS strategies.

``dist_async``  ATC diffusion with random ``A_i`` and random step-sizes
``dist_sync``   ATC diffusion with ``Abar`` and ``mubar_k = q_k mu_k``
``cent_async``  fusion-center LMS with random fusion vector and step-sizes
``cent_sync``   fusion-center LMS with ``pbar_k`` and ``mubar_k``

All enabled strategies of one trial see the same regressors and noise, and
the asynchronous pair shares the agents' on/off flags.  Each trial draws
from its own counter-based streams so a trial's curve does not depend on
which other trials ran alongside it.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import draw_stream
from .errors import InsufficientIterationsError, NumericalDivergenceError
from .moments import mean_matrix, perron
from .network import combination_matrices, combine_vectors, draw_agent_activity, draw_link_activity
from .rng import as_generator, trial_stream
from .theory import STRATEGIES, db

log = logging.getLogger(__name__)

CHUNK = 200          # iterations of random input drawn per trial at a time
TRIAL_BLOCK = 10     # trials advanced together; fixed so results never depend on threading
DIVERGENCE_CEILING = 1e12
DEFAULT_FUSION_T = 100


def sample_fusion_vectors(model, t, size, rng):
    """``size`` draws of ``phi = (1/N) A'_1 ... A'_t 1``, shape ``(size, N)``.

    Each ``A'_j`` is an independent realization of the combination matrix.
    """
    if t < 1:
        raise ValueError("fusion_t must be >= 1")
    n = model.n_agents
    v = np.full((size, n), 1.0 / n)
    for _ in range(t):
        v = combine_vectors(model, draw_link_activity(model, rng, size), v)
    return v


def sample_fusion_vector(model, t=DEFAULT_FUSION_T, rng=None):
    """One fusion vector on the probability simplex."""
    return sample_fusion_vectors(model, t, 1, as_generator(rng))[0]


def _streams(seed, trial):
    return {purpose: trial_stream(seed, trial, purpose)
            for purpose in ("data", "agents", "links", "fusion")}


class _FusionSource:
    """Per-trial supplier of fusion vectors, fresh or from a pre-drawn pool."""

    def __init__(self, model, t, pool, rng):
        self.model, self.t, self.rng = model, t, rng
        self.pool = None
        if pool:
            self.pool = sample_fusion_vectors(model, t, int(pool), rng)

    def draw(self, size):
        if self.pool is None:
            return sample_fusion_vectors(self.model, self.t, size, self.rng)
        return self.pool[self.rng.integers(0, len(self.pool), size)]


def _run_block(model, truth, n_iters, trials, seed, strategies, fusion_t, fusion_pool,
               complex_data, p_bar, init, hook=None):
    T, N, M = len(trials), model.n_agents, truth.M
    dtype = complex if complex_data else float
    streams = [_streams(seed, t) for t in trials]
    factors = truth.regressor_factors()
    w_o = truth.w_o if complex_data else truth.w_o.real
    mu = model.mu_nominal
    mu_bar = model.q * mu
    A_bar_T = mean_matrix(model).T
    if p_bar is None and "cent_sync" in strategies:
        p_bar = perron(mean_matrix(model))
    fusion = None
    if "cent_async" in strategies:
        fusion = [_FusionSource(model, fusion_t, fusion_pool, s["fusion"]) for s in streams]

    w0 = np.zeros(M, dtype=dtype) if init is None else np.asarray(init, dtype=dtype)
    dist = {s: np.broadcast_to(w0, (T, N, M)).copy() for s in strategies if s.startswith("dist")}
    cent = {s: np.broadcast_to(w0, (T, M)).copy() for s in strategies if s.startswith("cent")}
    curves = {s: np.full((T, n_iters), np.nan) for s in strategies}
    need_flags = "dist_async" in strategies or "cent_async" in strategies

    for start in range(0, n_iters, CHUNK):
        C = min(CHUNK, n_iters - start)
        u = np.empty((T, C, N, M), dtype=dtype)
        d = np.empty((T, C, N), dtype=dtype)
        for j, s in enumerate(streams):
            u[j], d[j] = draw_stream(truth, s["data"], C, complex_data, factors)
        uc = u.conj()
        if need_flags:
            mu_now = np.stack([np.where(draw_agent_activity(model, s["agents"], C), mu, 0.0)
                               for s in streams])
        if "dist_async" in strategies:
            A_T = np.swapaxes(combination_matrices(
                model, np.stack([draw_link_activity(model, s["links"], C) for s in streams])), -1, -2)
        if fusion is not None:
            phi = np.stack([f.draw(C) for f in fusion])

        with np.errstate(over="ignore", invalid="ignore"):
            for c in range(C):
                i = start + c
                uu, dd, ucc = u[:, c], d[:, c], uc[:, c]
                for name, w in dist.items():
                    err = dd - np.einsum("tnm,tnm->tn", uu, w)
                    step = mu_now[:, c] if name == "dist_async" else mu_bar
                    psi = w + (step * err)[..., None] * ucc
                    comb = A_T[:, c] if name == "dist_async" else A_bar_T
                    w = np.matmul(comb, psi)
                    dist[name] = w
                    curves[name][:, i] = np.mean(np.sum(np.abs(w - w_o) ** 2, axis=-1), axis=-1)
                for name, w in cent.items():
                    err = dd - np.einsum("tnm,tm->tn", uu, w)
                    if name == "cent_async":
                        gain = phi[:, c] * mu_now[:, c]
                    else:
                        gain = p_bar * mu_bar
                    w = w + np.einsum("tn,tnm->tm", gain * err, ucc)
                    cent[name] = w
                    curves[name][:, i] = np.sum(np.abs(w - w_o) ** 2, axis=-1)
                if hook is not None:
                    hook(i, {**dist, **cent})

        stop = start + C
        for name, curve in curves.items():
            block = curve[:, start:stop]
            if not np.all(np.isfinite(block)) or np.any(block > DIVERGENCE_CEILING):
                bad = np.argmax(~np.isfinite(block) | (block > DIVERGENCE_CEILING), axis=1)
                first = start + int(bad.min())
                for c2 in curves.values():
                    c2[:, first + 1:] = np.nan
                raise NumericalDivergenceError(
                    f"{name} exceeded {DIVERGENCE_CEILING:g} at iteration {first}",
                    curves=curves, iteration=first)
    return curves, {**dist, **cent}


def _thread_count():
    try:
        return max(1, int(os.environ.get("ASYNCNET_THREADS", "1")))
    except ValueError:
        return 1


def simulate(model, truth, n_iters, n_trials=1, seed=0, strategies=STRATEGIES,
             fusion_t=DEFAULT_FUSION_T, fusion_pool=None, complex_data=True,
             p_bar=None, init=None, trial_offset=0):
    """Per-trial MSD curves for each enabled strategy.

    Returns
    -------
    dict
        ``{strategy: ndarray of shape (n_trials, n_iters)}`` in linear scale.
    """
    strategies = tuple(s for s in STRATEGIES if s in set(strategies))
    if not strategies:
        raise ValueError("no strategy enabled")
    if n_iters < 1 or n_trials < 1:
        raise ValueError("n_iters and n_trials must be >= 1")
    trials = list(range(trial_offset, trial_offset + n_trials))
    blocks = [trials[j:j + TRIAL_BLOCK] for j in range(0, n_trials, TRIAL_BLOCK)]

    def work(block):
        return _run_block(model, truth, n_iters, block, seed, strategies, fusion_t,
                          fusion_pool, complex_data, p_bar, init)[0]

    threads = min(_thread_count(), len(blocks))
    log.debug("simulating %d trials x %d iterations on %d thread(s)", n_trials, n_iters, threads)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]
    return {s: np.concatenate([r[s] for r in results]) for s in strategies}


@dataclass
class RunResult:
    """Single-trial output: MSD per iteration and the final estimates."""

    msd: np.ndarray
    weights: np.ndarray


def _seed_from(rng):
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2 ** 63))
    return 0 if rng is None else int(rng)


def _single(strategy, model, truth, n_iters, rng, hook=None, **kw):
    seed = _seed_from(rng)
    curves, state = _run_block(model, truth, n_iters, [0], seed, (strategy,),
                               kw.get("fusion_t", DEFAULT_FUSION_T), kw.get("fusion_pool"),
                               kw.get("complex_data", True), kw.get("p_bar"), kw.get("init"),
                               hook=None if hook is None else (lambda i, s: hook(i, s[strategy][0])))
    return RunResult(msd=curves[strategy][0], weights=state[strategy][0])


def run_diffusion_async(model, truth, n_iters, rng=None, hook=None, **kw):
    """ATC diffusion with random combination matrices and step-sizes."""
    return _single("dist_async", model, truth, n_iters, rng, hook, **kw)


def run_diffusion_sync(model, truth, n_iters, rng=None, hook=None, **kw):
    """ATC diffusion with ``Abar`` and ``mubar``."""
    return _single("dist_sync", model, truth, n_iters, rng, hook, **kw)


def run_centralized_async(model, truth, n_iters, t=DEFAULT_FUSION_T, rng=None, hook=None, **kw):
    """Fusion-center LMS with random fusion vectors built from ``t`` matrix products."""
    return _single("cent_async", model, truth, n_iters, rng, hook, fusion_t=t, **kw)


def run_centralized_sync(model, truth, n_iters, rng=None, hook=None, **kw):
    """Fusion-center LMS with weights ``pbar_k mubar_k``."""
    return _single("cent_sync", model, truth, n_iters, rng, hook, **kw)


@dataclass
class LearningCurve:
    strategy: str
    msd: np.ndarray
    n_trials: int

    @property
    def n_iters(self):
        return len(self.msd)

    @property
    def msd_db(self):
        return 10.0 * np.log10(self.msd)


@dataclass
class SteadyStateEstimate:
    msd_linear: float
    msd_db: float
    tail_window: int
    stderr: float
    stderr_db: float
    tail_means: np.ndarray

    def to_dict(self):
        return {"msd_linear": self.msd_linear, "msd_db": self.msd_db,
                "tail_window": self.tail_window, "stderr": self.stderr,
                "stderr_db": self.stderr_db}


def average_curves(runs, strategy=""):
    """Mean across trials per iteration; ``runs`` has shape ``(n_trials, n_iters)``."""
    runs = np.atleast_2d(np.asarray(runs, dtype=float))
    if runs.shape[0] < 1:
        raise ValueError("need at least one trial")
    return LearningCurve(strategy=strategy, msd=runs.mean(axis=0), n_trials=runs.shape[0])


MIN_TAIL = 200
MIN_TAIL_SAMPLES = 50


def tail_window(n_iters, tail_fraction=0.1):
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    window = min(n_iters, max(int(round(tail_fraction * n_iters)), MIN_TAIL))
    if window < MIN_TAIL_SAMPLES:
        raise InsufficientIterationsError(f"tail window of {window} < {MIN_TAIL_SAMPLES} samples")
    return window


def steady_state(runs, tail_fraction=0.1):
    """Steady-state MSD from the tail of per-trial curves.

    ``runs`` is either a ``(n_trials, n_iters)`` array or a
    :class:`LearningCurve` (which then counts as a single trial).
    """
    if isinstance(runs, LearningCurve):
        runs = runs.msd[None, :]
    runs = np.atleast_2d(np.asarray(runs, dtype=float))
    window = tail_window(runs.shape[1], tail_fraction)
    tails = runs[:, -window:].mean(axis=1)
    mean = float(tails.mean())
    se = float(tails.std(ddof=1) / np.sqrt(len(tails))) if len(tails) > 1 else 0.0
    return SteadyStateEstimate(msd_linear=mean, msd_db=db(mean), tail_window=window,
                               stderr=se, stderr_db=10.0 / np.log(10.0) * se / mean,
                               tail_means=tails)
