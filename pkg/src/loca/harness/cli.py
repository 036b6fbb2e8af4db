"""``loca`` command line: run suites, print tables, plot curves.

Exit status: 0 on success, 1 on a configuration/validation error, 2 when a
run or file operation fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from loca import kernels
from loca.agents import AGENTS, DEFAULTS
from loca.envs import ENVIRONMENTS
from loca.harness.config import ENV_DEFAULTS, ParseError, ValidationError, load_config
from loca.harness.report import MissingBaseline, emit_svg_curves, mean_curve, render_table
from loca.harness.results import load_results, summarize, write_results
from loca.harness.runner import SuiteError, run_suite

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.runs is not None:
        changes["runs"] = args.runs
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.out is not None:
        changes["out"] = args.out
    if any(v < (0 if k == "seed" else 1) for k, v in changes.items() if k != "out"):
        raise ValidationError("--runs and --workers must be >= 1, --seed >= 0")
    cfg = dataclasses.replace(cfg, **changes)
    try:
        records = run_suite(cfg)
    except SuiteError as e:
        done = ", ".join(f"{m}#{r}" for m, r in e.completed) or "none"
        print(f"error: {e}\ncompleted runs: {done}\nno results were written", file=sys.stderr)
        return EXIT_FAILED
    out = write_results(records, cfg.out, cfg)
    print(f"wrote {out}")
    if cfg.baseline:
        print(render_table(summarize(records, cfg), cfg.baseline), end="")
    return EXIT_OK


def _cmd_report(args) -> int:
    cfg, records = load_results(args.input)
    baseline = args.baseline or cfg.baseline
    if baseline is None:
        raise MissingBaseline("no baseline configured; pass --baseline")
    if cfg.baseline != baseline:
        cfg = dataclasses.replace(cfg, baseline=baseline)
    print(render_table(summarize(records, cfg), baseline), end="")
    return EXIT_OK


def _cmd_plot(args) -> int:
    cfg, records = load_results(args.input)
    curves, labels = {}, []
    for m in cfg.methods:
        runs = [r.curve_loca if args.mode == "loca" else r.curve_default for r in records if r.method == m.id]
        if runs:
            curves[m.id] = mean_curve(runs)
            labels.append(m.display(cfg.gamma))
    title = f"top-terminal fraction ({'with' if args.mode == 'loca' else 'without'} LoCA pretraining)"
    emit_svg_curves(curves, labels, args.output, title=title)
    print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_list(args) -> int:
    print(f"kernels: {kernels.BACKEND}")
    print("environments:")
    for name in sorted(ENVIRONMENTS):
        d = ENV_DEFAULTS[name]
        print(f"  {name:12s} gamma={d['gamma']} phases={d['phase1']}/{d['phase2']}/{d['phase3']} "
              f"delta_train={d['delta_train']} deadline={d['deadline']}")
    print("agents:")
    for name in sorted(AGENTS):
        params = ", ".join(f"{k}={v}" for k, v in DEFAULTS[name].items())
        print(f"  {name:16s} {params}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loca", description="Local Change Adaptation experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log each finished run")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment suite")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--runs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int, help="parallel worker processes")
    r.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="print the regret table of a finished suite")
    rep.add_argument("--in", dest="input", required=True, type=Path)
    rep.add_argument("--baseline", help="method id for relative gains (default: the configured one)")
    rep.set_defaults(func=_cmd_report)

    pl = sub.add_parser("plot", help="SVG of mean top-terminal fraction curves")
    pl.add_argument("--in", dest="input", required=True, type=Path)
    pl.add_argument("--out", dest="output", required=True, type=Path)
    pl.add_argument("--mode", choices=("loca", "default"), default="loca")
    pl.set_defaults(func=_cmd_plot)

    ls = sub.add_parser("list", help="registered environments and agents")
    ls.set_defaults(func=_cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError, MissingBaseline) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
