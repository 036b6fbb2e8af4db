"""Aggregation over runs and the on-disk result format.

An output directory holds:

``curves.jsonl``
    one JSON object per evaluation point: ``method``, ``run``, ``mode``
    (``loca`` or ``default``), ``step``, ``fraction``, ``horizon``. Floats
    are written in shortest round-trip form, so curves reload exactly.
``summary.csv``
    one row per method: ``method, default_regret, default_stderr,
    loca_regret, loca_stderr, gain, relative_gain`` in fixed six-decimal
    notation (``inf`` for an infinite gain, empty when there is no baseline).
``config.snapshot``
    the parsed configuration with all defaults filled in; it parses back to
    the same configuration.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from loca.core import LocaError
from loca.harness.config import ExperimentConfig, parse_config
from loca.harness.runner import RunRecord
from loca.protocol import EvalCurve, EvalPoint, UndefinedBaseline, gain, gains, regret

CURVES = "curves.jsonl"
SUMMARY = "summary.csv"
SNAPSHOT = "config.snapshot"
SUMMARY_COLUMNS = ("method", "default_regret", "default_stderr", "loca_regret", "loca_stderr",
                   "gain", "relative_gain")


class EmptyInput(LocaError):
    pass


@dataclass(frozen=True)
class AggregateStats:
    mean: float
    stderr: float
    n: int


def aggregate(values: Sequence[float]) -> AggregateStats:
    """Mean and standard error (sample standard deviation over sqrt(n))."""
    xs = [float(x) for x in values]
    n = len(xs)
    if n == 0:
        raise EmptyInput("cannot aggregate an empty list")
    if all(x == xs[0] for x in xs):
        return AggregateStats(xs[0], 0.0, n)
    mean = math.fsum(xs) / n
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    return AggregateStats(mean, math.sqrt(var) / math.sqrt(n), n)


@dataclass(frozen=True)
class MethodSummary:
    method: str
    label: str
    agent: str
    default: AggregateStats
    loca: AggregateStats
    gain: float
    relative_gain: Optional[float]


def summarize(records: Iterable[RunRecord], cfg: ExperimentConfig) -> list[MethodSummary]:
    """Per-method statistics in configuration order; gains use mean regrets."""
    by_method = defaultdict(list)
    for r in records:
        by_method[r.method].append(r)
    stats = {}
    for m in cfg.methods:
        recs = by_method.get(m.id)
        if not recs:
            continue
        stats[m.id] = (aggregate([r.default_regret for r in recs]), aggregate([r.loca_regret for r in recs]))
    base = stats.get(cfg.baseline) if cfg.baseline else None
    out = []
    for m in cfg.methods:
        if m.id not in stats:
            continue
        d, lo = stats[m.id]
        rel = None
        if base is not None:
            try:
                rel = gains(d.mean, lo.mean, base[0].mean, base[1].mean)[1]
            except UndefinedBaseline:
                rel = None
        out.append(MethodSummary(m.id, m.display(cfg.gamma), m.agent, d, lo, gain(d.mean, lo.mean), rel))
    return out


def _fixed(x: Optional[float]) -> str:
    if x is None:
        return ""
    return "inf" if math.isinf(x) else f"{x:.6f}"


def write_results(records: Sequence[RunRecord], out_dir, cfg: ExperimentConfig) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / CURVES, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            for mode, curve in (("loca", r.curve_loca), ("default", r.curve_default)):
                for p in curve.points:
                    f.write(json.dumps({"method": r.method, "run": r.run_index, "mode": mode, "step": p.step,
                                        "fraction": p.fraction, "horizon": curve.horizon}) + "\n")
    with open(out / SUMMARY, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summarize(records, cfg):
            w.writerow([s.method, _fixed(s.default.mean), _fixed(s.default.stderr), _fixed(s.loca.mean),
                        _fixed(s.loca.stderr), _fixed(s.gain), _fixed(s.relative_gain)])
    (out / SNAPSHOT).write_text(cfg.dump(), encoding="utf-8")
    return out


def read_curves(path) -> dict[tuple[str, str], dict[int, EvalCurve]]:
    """``{(method, mode): {run: curve}}`` from a ``curves.jsonl`` file."""
    curves: dict[tuple[str, str], dict[int, EvalCurve]] = defaultdict(dict)
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            runs = curves[(d["method"], d["mode"])]
            curve = runs.setdefault(d["run"], EvalCurve(horizon=d["horizon"]))
            curve.points.append(EvalPoint(d["step"], d["fraction"]))
    return dict(curves)


def load_results(in_dir) -> tuple[ExperimentConfig, list[RunRecord]]:
    """Rebuild the run records of a finished suite from its output directory."""
    d = Path(in_dir)
    cfg = parse_config((d / SNAPSHOT).read_text(encoding="utf-8"))
    curves = read_curves(d / CURVES)
    delta = cfg.eval.delta_train
    records = []
    for m in cfg.methods:
        loca, default = curves.get((m.id, "loca"), {}), curves.get((m.id, "default"), {})
        for run in sorted(loca):
            records.append(RunRecord(m.id, run, cfg.seed + run, loca[run], default[run],
                                     regret(loca[run], delta), regret(default[run], delta)))
    return cfg, records
