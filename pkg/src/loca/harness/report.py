"""Regret tables and SVG learning curves."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

from loca.agents import MODEL_FREE
from loca.core import LocaError
from loca.harness.results import MethodSummary
from loca.protocol import EvalCurve


class MissingBaseline(LocaError):
    pass


def _k(x: float) -> str:
    return f"{x / 1000:.2f}"


def _gain(x) -> str:
    if x is None:
        return "-"
    return "∞" if math.isinf(x) else f"{x:.2f}"


def order_rows(summaries: Sequence[MethodSummary]) -> list[MethodSummary]:
    """Model-free methods first, then one block per model-based agent; input order within blocks."""
    blocks: dict[str, int] = {}
    for s in summaries:
        if s.agent not in MODEL_FREE:
            blocks.setdefault(s.agent, len(blocks) + 1)
    return sorted(summaries, key=lambda s: 0 if s.agent in MODEL_FREE else blocks[s.agent])


def render_table(summaries: Sequence[MethodSummary], baseline: str) -> str:
    """Markdown table of regrets (x 1000, standard error in parentheses) and relative gains."""
    if not any(s.method == baseline for s in summaries):
        raise MissingBaseline(f"baseline {baseline!r} is not among the summarized methods")
    lines = [
        "| method | default regret | (se) | LoCA regret | (se) | relative gain |",
        "|---|---:|---:|---:|---:|---:|",
    ]
    for s in order_rows(summaries):
        lines.append(f"| {s.label} | {_k(s.default.mean)} | ({_k(s.default.stderr)}) "
                     f"| {_k(s.loca.mean)} | ({_k(s.loca.stderr)}) | {_gain(s.relative_gain)} |")
    return "\n".join(lines) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
            "#bcbd22", "#17becf")


def mean_curve(curves: Sequence[EvalCurve]) -> EvalCurve:
    """Pointwise mean over runs (curves must share their evaluation steps)."""
    first = curves[0]
    for c in curves[1:]:
        if c.steps != first.steps:
            raise ValueError("curves are evaluated at different steps")
    pts = [type(p)(p.step, sum(c.points[i].fraction for c in curves) / len(curves))
           for i, p in enumerate(first.points)]
    return EvalCurve(pts, first.horizon)


def emit_svg_curves(curves: Mapping[str, EvalCurve], labels: Sequence[str] = (), path=None,
                    title: str = "top-terminal fraction") -> str:
    """Write a standalone SVG line chart (steps vs. fraction) and return its text.

    ``curves`` maps method names to curves; ``labels`` (same order) replace
    the names in the legend.
    """
    if not curves:
        raise ValueError("need at least one curve")
    names = list(curves)
    labels = list(labels) if labels else names
    if len(labels) != len(names):
        raise ValueError("one label per curve")
    W, H = 720, 420
    left, right, top, bottom = 60, 200, 30, 50
    pw, ph = W - left - right, H - top - bottom
    x_max = max(max(c.horizon, c.points[-1].step if c.points else 0) for c in curves.values()) or 1

    def X(step: float) -> float:
        return left + pw * step / x_max

    def Y(f: float) -> float:
        return top + ph * (1.0 - f)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for i in range(5):
        f = i / 4
        y = Y(f)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">{f:.2f}</text>')
    for i in range(6):
        step = x_max * i / 5
        x = X(step)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">{step:g}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">training steps</text>')
    for i, (name, label) in enumerate(zip(names, labels)):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{X(p.step):.2f},{Y(p.fraction):.2f}" for p in curves[name].points)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 10 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 36}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 42}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
