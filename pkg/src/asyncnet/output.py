"""CSV learning curves and JSON reports.

Both writers are byte-stable: the same inputs always give the same bytes.
"""

import csv
import json
import math

import numpy as np

from .theory import STRATEGIES

CSV_HEADER = ["iter"] + [f"msd_db_{s}" for s in STRATEGIES]


def _as_msd(curve):
    return np.asarray(getattr(curve, "msd", curve), dtype=float)


def _fmt(x):
    return "" if x is None or not math.isfinite(x) else f"{x:.10g}"


def emit_csv(curves, path):
    """Write one row per iteration with the trial-averaged MSD in dB.

    ``curves`` maps strategy names to :class:`LearningCurve` objects or 1-D
    arrays; strategies that are absent leave their column empty.
    """
    data = {s: _as_msd(c) for s, c in curves.items()}
    unknown = set(data) - set(STRATEGIES)
    if unknown:
        raise ValueError(f"unknown strategies {sorted(unknown)}")
    n = max((len(v) for v in data.values()), default=0)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for i in range(n):
                row = [str(i + 1)]
                for s in STRATEGIES:
                    v = data.get(s)
                    row.append(_fmt(10.0 * math.log10(v[i])) if v is not None and i < len(v)
                               and v[i] > 0 else "")
                writer.writerow(row)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write CSV: {exc.strerror}", str(path)) from None


def _clean(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(doc):
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def emit_report(report, path):
    """Write a report (anything with ``to_dict``, or a dict) as JSON."""
    doc = report.to_dict() if hasattr(report, "to_dict") else report
    text = dumps(doc)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report: {exc.strerror}", str(path)) from None
