"""Experiment configuration: JSON loading, validation and materialization.

A configuration is one JSON object.  Matrices are given row-major as nested
lists.  Random laws (``{"uniform": [a, b]}`` and ``{"choice": [...]}``) are
resolved once from the config seed by :func:`materialize`; the drawn values
are then frozen into every report.
"""

import copy
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import AgentDataProfile, ScenarioTruth
from .errors import ConfigParseError, ConfigValidationError
from .network import BernoulliAsyncModel, build_topology, parse_descriptor
from .rng import stream
from .theory import STRATEGIES

SIMULATION_DEFAULTS = {
    "trials": 100,
    "iterations": 6000,
    "tail_fraction": 0.1,
    "fusion_t": 100,
    "fusion_pool": None,
}

TOP_LEVEL_KEYS = {"name", "topology", "seed", "M", "w_o", "mu", "q", "eta", "sigma_u2",
                  "R_u", "sigma_xi2", "data", "simulation", "strategies", "alpha", "mu_sweep"}


@dataclass
class SimulationSettings:
    trials: int = 100
    iterations: int = 6000
    tail_fraction: float = 0.1
    fusion_t: int = 100
    fusion_pool: int = None


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``q``, ``eta``, ``sigma_u2`` and ``sigma_xi2`` may still hold random laws
    (dicts); :func:`materialize` turns them into numbers.
    """

    topology: object
    M: int
    mu: float
    q: object = 1.0
    eta: object = 1.0
    seed: int = 0
    w_o: object = "random"
    sigma_u2: object = 1.0
    R_u: object = None
    sigma_xi2: object = 0.01
    data: str = "complex"
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    strategies: dict = field(default_factory=lambda: {s: True for s in STRATEGIES})
    alpha: float = 0.0
    mu_sweep: list = None
    name: str = None

    @property
    def n_agents(self):
        return int(parse_descriptor(self.topology)["n_agents"])

    @property
    def fusion_t(self):
        return self.simulation.fusion_t

    @property
    def enabled(self):
        return tuple(s for s in STRATEGIES if self.strategies.get(s, False))

    def to_dict(self):
        return asdict(self)

    def replace(self, **changes):
        """Copy with top-level fields (or ``simulation`` entries) replaced."""
        doc = self.to_dict()
        sim = changes.pop("simulation", {})
        doc.update(changes)
        doc["simulation"].update(sim)
        return config_from_dict(doc)


def _fail(field_name, message):
    raise ConfigValidationError(f"{field_name}: {message}")


def _number(value, name, lo=None, hi=None, lo_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(name, f"expected a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        _fail(name, "must be finite")
    if lo is not None and (value < lo or (lo_open and value == lo)):
        _fail(name, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and value > hi:
        _fail(name, f"must be <= {hi}, got {value}")
    return value


def _integer(value, name, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(name, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        _fail(name, f"must be >= {lo}, got {value}")
    return value


def _law(value, name, lo=None, hi=None, lo_open=False):
    """Scalar, list of scalars, nested list, ``{"uniform": [a, b]}`` or ``{"choice": [...]}``."""
    if isinstance(value, dict):
        if set(value) == {"uniform"}:
            bounds = value["uniform"]
            if not isinstance(bounds, list) or len(bounds) != 2:
                _fail(name, "uniform needs [low, high]")
            a, b = (_number(v, name, lo, hi, lo_open) for v in bounds)
            if a > b:
                _fail(name, "uniform low exceeds high")
            return {"uniform": [a, b]}
        if set(value) == {"choice"}:
            options = value["choice"]
            if not isinstance(options, list) or not options:
                _fail(name, "choice needs a nonempty list")
            return {"choice": [_number(v, name, lo, hi, lo_open) for v in options]}
        _fail(name, f"unknown law {sorted(value)}; use 'uniform' or 'choice'")
    if isinstance(value, list):
        return [_law(v, f"{name}[{i}]", lo, hi, lo_open) if isinstance(v, list)
                else _number(v, f"{name}[{i}]", lo, hi, lo_open) for i, v in enumerate(value)]
    return _number(value, name, lo, hi, lo_open)


def _w_o(value, M):
    if value is None or value == "random":
        return "random"
    if isinstance(value, dict):
        if set(value) - {"re", "im"} or "re" not in value:
            _fail("w_o", "complex form is {'re': [...], 'im': [...]}")
        re_part = [_number(v, "w_o.re") for v in value["re"]]
        im_part = [_number(v, "w_o.im") for v in value.get("im", [0.0] * len(re_part))]
        if len(re_part) != M or len(im_part) != M:
            _fail("w_o", f"needs {M} entries")
        return {"re": re_part, "im": im_part}
    if isinstance(value, list):
        if len(value) != M:
            _fail("w_o", f"needs {M} entries, got {len(value)}")
        return [_number(v, "w_o") for v in value]
    _fail("w_o", "expected 'random', a list or {'re', 'im'}")


def config_from_dict(doc):
    """Validate a parsed document and apply defaults."""
    if not isinstance(doc, dict):
        _fail("<root>", "configuration must be a JSON object")
    unknown = set(doc) - TOP_LEVEL_KEYS
    if unknown:
        _fail(sorted(unknown)[0], "unknown key")
    for key in ("topology", "M", "mu"):
        if key not in doc:
            _fail(key, "missing required field")
    try:
        desc = parse_descriptor(doc["topology"])
        n_agents = int(desc["n_agents"])
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigValidationError(f"topology: {exc}") from None
    if n_agents < 1:
        _fail("topology", "needs at least one agent")

    M = _integer(doc["M"], "M", lo=1)
    mu = _number(doc["mu"], "mu", lo=0.0, lo_open=True)
    seed = _integer(doc.get("seed", 0), "seed", lo=0)

    sim_doc = doc.get("simulation") or {}
    if not isinstance(sim_doc, dict):
        _fail("simulation", "expected an object")
    unknown = set(sim_doc) - set(SIMULATION_DEFAULTS)
    if unknown:
        _fail(f"simulation.{sorted(unknown)[0]}", "unknown key")
    sim = dict(SIMULATION_DEFAULTS, **sim_doc)
    pool = sim["fusion_pool"]
    simulation = SimulationSettings(
        trials=_integer(sim["trials"], "simulation.trials", lo=1),
        iterations=_integer(sim["iterations"], "simulation.iterations", lo=1),
        tail_fraction=_number(sim["tail_fraction"], "simulation.tail_fraction",
                              lo=0.0, hi=1.0, lo_open=True),
        fusion_t=_integer(sim["fusion_t"], "simulation.fusion_t", lo=1),
        fusion_pool=None if pool is None else _integer(pool, "simulation.fusion_pool", lo=1),
    )

    strategies = {s: True for s in STRATEGIES}
    toggles = doc.get("strategies") or {}
    if not isinstance(toggles, dict):
        _fail("strategies", "expected an object of booleans")
    for key, flag in toggles.items():
        if key not in STRATEGIES:
            _fail(f"strategies.{key}", "unknown strategy")
        if not isinstance(flag, bool):
            _fail(f"strategies.{key}", "expected true or false")
        strategies[key] = flag

    data = doc.get("data", "complex")
    if data not in ("complex", "real"):
        _fail("data", "must be 'complex' or 'real'")

    R_u = doc.get("R_u")
    if R_u is not None:
        arr = np.asarray(R_u, dtype=float) if isinstance(R_u, list) else None
        if arr is None or arr.shape not in ((M, M), (n_agents, M, M)):
            _fail("R_u", f"expected an {M}x{M} matrix or {n_agents} of them")

    sweep = doc.get("mu_sweep")
    if sweep is not None:
        if not isinstance(sweep, list) or not sweep:
            _fail("mu_sweep", "expected a nonempty list of step-sizes")
        sweep = [_number(v, "mu_sweep", lo=0.0, lo_open=True) for v in sweep]

    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        _fail("name", "expected a string")

    return ExperimentConfig(
        topology=copy.deepcopy(doc["topology"]), M=M, mu=mu, seed=seed,
        q=_law(doc.get("q", 1.0), "q", lo=0.0, hi=1.0, lo_open=True),
        eta=_law(doc.get("eta", 1.0), "eta", lo=0.0, hi=1.0, lo_open=True),
        w_o=_w_o(doc.get("w_o", "random"), M),
        sigma_u2=_law(doc.get("sigma_u2", 1.0), "sigma_u2", lo=0.0, lo_open=True),
        R_u=R_u,
        sigma_xi2=_law(doc.get("sigma_xi2", 0.01), "sigma_xi2", lo=0.0),
        data=data, simulation=simulation, strategies=strategies,
        alpha=_number(doc.get("alpha", 0.0), "alpha", lo=0.0),
        mu_sweep=sweep, name=name,
    )


def parse_config(text, source="<string>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(doc)


def load_config(path):
    """Read and validate a JSON configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"{path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


@dataclass(frozen=True, eq=False)
class Scenario:
    """A config turned into concrete model and data truth."""

    config: ExperimentConfig
    model: BernoulliAsyncModel
    truth: ScenarioTruth

    @property
    def complex_data(self):
        return self.config.data == "complex"

    def frozen_parameters(self):
        """The drawn per-agent and per-link values, for reports."""
        src, dst = self.model.links
        w = self.truth.w_o
        return {
            "n_agents": self.model.n_agents,
            "edges": [list(e) for e in self.model.topology.edges],
            "q": self.model.q.tolist(),
            "mu": self.model.mu_nominal.tolist(),
            "eta": [[int(l), int(k), float(e)] for l, k, e in zip(src, dst, self.model.eta)],
            "sigma_u2": [float(np.real(np.trace(p.R_u))) / self.truth.M for p in self.truth.profiles],
            "sigma_xi2": self.truth.sigma_xi2.tolist(),
            "w_o": {"re": w.real.tolist(), "im": w.imag.tolist()},
        }


def _draw(law, size, rng):
    if isinstance(law, dict) and "uniform" in law:
        return rng.uniform(*law["uniform"], size)
    if isinstance(law, dict) and "choice" in law:
        return rng.choice(np.asarray(law["choice"], dtype=float), size)
    return law


def materialize(config, mu=None):
    """Resolve every random law with streams derived from ``config.seed``.

    Each quantity has its own stream, so changing one law never moves the
    draws of another.  ``mu`` overrides the configured step-size.
    """
    topo = build_topology(config.topology)
    n, M = topo.n_agents, config.M
    n_links = len(topo.directed_links()[0])
    seed = config.seed

    def draw(law, size, purpose):
        return _draw(law, size, stream(seed, "materialize", purpose))

    try:
        model = BernoulliAsyncModel.from_topology(
            topo, q=draw(config.q, n, "q"), eta=draw(config.eta, n_links, "eta"),
            mu=config.mu if mu is None else mu)
    except ValueError as exc:
        raise ConfigValidationError(f"q/eta: {exc}") from None

    sigma_xi2 = np.broadcast_to(np.asarray(draw(config.sigma_xi2, n, "sigma_xi2"), float), (n,))
    if config.R_u is not None:
        R = np.asarray(config.R_u, dtype=float)
        R = np.broadcast_to(R, (n, M, M))
    else:
        s = np.asarray(draw(config.sigma_u2, n, "sigma_u2"), dtype=float)
        if s.ndim and s.shape != (n,):
            _fail("sigma_u2", f"expected scalar or {n} values")
        R = np.broadcast_to(s, (n,))[:, None, None] * np.eye(M)
    if sigma_xi2.shape != (n,):
        _fail("sigma_xi2", f"expected scalar or {n} values")

    if config.w_o == "random":
        g = stream(seed, "materialize", "w_o")
        if config.data == "complex":
            w = g.standard_normal(M) + 1j * g.standard_normal(M)
        else:
            w = g.standard_normal(M)
        w = w / np.linalg.norm(w)
    elif isinstance(config.w_o, dict):
        w = np.asarray(config.w_o["re"]) + 1j * np.asarray(config.w_o["im"])
    else:
        w = np.asarray(config.w_o, dtype=float)

    try:
        profiles = [AgentDataProfile(R_u=R[k], sigma_xi2=sigma_xi2[k]) for k in range(n)]
        truth = ScenarioTruth(w_o=w, profiles=profiles)
    except ValueError as exc:
        raise ConfigValidationError(f"R_u/sigma: {exc}") from None
    if config.data == "real" and not truth.is_real():
        _fail("data", "real mode needs a real w_o")
    return Scenario(config=config, model=model, truth=truth)
