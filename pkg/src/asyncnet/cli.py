"""Command line interface: ``asyncnet {theory,simulate,compare,validate,sample-moments}``."""

import argparse
import logging
import sys

from . import __version__
from .compare import msd_db_table, run_compare, theory_summary
from .config import load_config, materialize
from .errors import AsyncNetError, NumericalDivergenceError
from .moments import compute_moments
from .network import BernoulliAsyncModel, build_topology
from .output import dumps, emit_csv, emit_report
from .presets import preset, preset_names
from .rng import stream
from .simulator import average_curves, simulate, steady_state
from .theory import STRATEGIES
from .validate import run_validation

log = logging.getLogger("asyncnet")


def _fmt_db(x):
    return "-" if x is None else f"{x:9.3f}"


def _load(args):
    if args.config and args.preset:
        raise SystemExit("error: give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = preset(args.preset or "desk")
    changes, sim = {}, {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    for key in ("trials", "iterations", "fusion_pool"):
        if getattr(args, key, None) is not None:
            sim[key] = getattr(args, key)
    if changes or sim:
        cfg = cfg.replace(simulation=sim, **changes)
    return cfg


def _print_checks(checks, out=sys.stdout):
    for c in checks:
        flag = "PASS" if c.passed else "FAIL"
        print(f"{flag}  {c.name:48s} {c.measured:.4g} {c.relation} {c.threshold:.4g}  {c.detail}",
              file=out)


def cmd_theory(args):
    cfg = _load(args)
    scenario, moments, theory = theory_summary(cfg)
    print(f"nu={theory.nu:.6g}  rho_mean={theory.rho_mean:.10f}  "
          f"rho(F_sync)={theory.rho_ms_sync:.10f}  rho(F_async)={theory.rho_ms_async:.10f}")
    for s in STRATEGIES:
        print(f"{s:12s} {theory.msd_db[s]:9.3f} dB")
    if args.out:
        emit_report({"parameters": scenario.frozen_parameters(), "theory": theory.to_dict()},
                    args.out)
    return 0


def cmd_simulate(args):
    cfg = _load(args)
    scenario = materialize(cfg)
    strategies = args.strategy or cfg.enabled
    sim = cfg.simulation
    runs = simulate(scenario.model, scenario.truth, sim.iterations, sim.trials, seed=cfg.seed,
                    strategies=strategies, fusion_t=sim.fusion_t, fusion_pool=sim.fusion_pool,
                    complex_data=scenario.complex_data)
    curves = {s: average_curves(v, s) for s, v in runs.items()}
    result = {}
    for s, v in runs.items():
        est = steady_state(v, sim.tail_fraction)
        result[s] = est.to_dict()
        if args.tail_means:
            result[s]["tail_means"] = est.tail_means
        print(f"{s:12s} {est.msd_db:9.3f} dB  (stderr {est.stderr_db:.3f} dB)")
    if args.csv:
        emit_csv(curves, args.csv)
    if args.out:
        emit_report({"parameters": scenario.frozen_parameters(), "simulated": result}, args.out)
    return 0


def cmd_compare(args):
    cfg = _load(args)
    try:
        report = run_compare(cfg)
    except NumericalDivergenceError as exc:
        report = getattr(exc, "report", None)
        if report is not None:
            if args.out:
                emit_report(report, args.out)
            if args.csv:
                emit_csv(report.curves, args.csv)
        raise
    print(f"{'strategy':12s} {'theory':>9s} {'sim':>9s} {'delta':>9s}")
    for s, th, sim, delta in msd_db_table(report):
        print(f"{s:12s} {_fmt_db(th)} {_fmt_db(sim)} {_fmt_db(delta)}")
    _print_checks(report.lemma_checks)
    if args.out:
        emit_report(report, args.out)
    if args.csv:
        emit_csv(report.curves, args.csv)
    return 0 if report.passed else 1


def cmd_validate(args):
    checks = run_validation(quick=args.quick, seed=args.seed or 0)
    _print_checks(checks)
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    if args.out:
        emit_report({"lemma_checks": [c.to_dict() for c in checks]}, args.out)
    return 1 if failed else 0


def cmd_sample_moments(args):
    if args.topology:
        model = BernoulliAsyncModel.from_topology(build_topology(args.topology),
                                                  q=args.q, eta=args.eta)
    else:
        model = materialize(_load(args)).model
    kw = {"method": args.method, "samples": args.samples}
    if args.method == "mc":
        kw["rng"] = stream(args.seed or 0, "sample-moments")
    moments = compute_moments(model, **kw)
    doc = moments.to_dict()
    if args.out:
        emit_report(doc, args.out)
    else:
        sys.stdout.write(dumps({k: doc[k] for k in ("p_bar", "residual_mean", "residual_joint",
                                                    "method")}))
    return 0


def _add_source(p):
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--preset", choices=preset_names(), help="named configuration (default: desk)")
    p.add_argument("--seed", type=int, help="override the configured seed")


def _add_sim(p):
    p.add_argument("--trials", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--fusion-pool", dest="fusion_pool", type=int,
                   help="draw fusion vectors from a pre-sampled pool of this size")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="asyncnet", description="Asynchronous diffusion network experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="moments, rates and MSD predictions")
    _add_source(p)
    p.add_argument("--out", help="write the theory report as JSON")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("simulate", help="Monte Carlo learning curves")
    _add_source(p)
    _add_sim(p)
    p.add_argument("--strategy", action="append", choices=STRATEGIES,
                   help="strategy to run (repeatable; default: those enabled in the config)")
    p.add_argument("--csv", help="learning curves in dB")
    p.add_argument("--out", help="steady-state estimates as JSON")
    p.add_argument("--tail-means", action="store_true", help="include per-trial tail means")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="theory versus simulation with lemma checks")
    _add_source(p)
    _add_sim(p)
    p.add_argument("--out", help="comparison report (JSON)")
    p.add_argument("--csv", help="learning curves in dB")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="run the property suite")
    p.add_argument("--quick", action="store_true", help="smaller samples, no desk simulation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write check records as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample-moments", help="mean/second moments and Perron vectors")
    _add_source(p)
    p.add_argument("--topology", help="descriptor such as 'ring(5)'; overrides the config")
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--method", choices=("auto", "exact", "analytic", "mc"), default="auto")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--out", help="write the full moment set as JSON")
    p.set_defaults(func=cmd_sample_moments)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AsyncNetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
