import csv
import dataclasses
import math
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given
from hypothesis import strategies as st

from loca.harness import runner
from loca.harness.cli import main
from loca.harness.config import ParseError, ValidationError, load_config, parse_config
from loca.harness.report import MissingBaseline, emit_svg_curves, render_table
from loca.harness.results import (
    CURVES,
    SNAPSHOT,
    SUMMARY,
    EmptyInput,
    aggregate,
    load_results,
    read_curves,
    summarize,
    write_results,
)
from loca.harness.runner import SuiteError, run_suite
from loca.protocol import EvalCurve, EvalPoint

import oracles

TINY = """
environment: gridworld
methods: [q_learning, mb_vi, {agent: sarsa_lambda, s_mult: 2}]
schedule: {phase1: 2000, phase2: 300, phase3: 1000}
runs: 2
seed: 3
"""


@pytest.fixture(scope="module")
def tiny():
    cfg = parse_config(TINY)
    return cfg, run_suite(cfg)


# -- configuration -----------------------------------------------------------

def test_minimal_config_defaults():
    cfg = parse_config("environment: gridworld\nagent: mb_vi\n")
    assert cfg.runs == 10 and cfg.seed == 0 and cfg.workers == 1
    assert (cfg.schedule.phase1, cfg.schedule.phase2, cfg.schedule.phase3) == (100_000, 5_000, 50_000)
    assert cfg.schedule.episode_cap == 100
    assert (cfg.eval.delta_train, cfg.eval.episodes, cfg.eval.deadline) == (100, 10, 40)
    assert cfg.default_mode == "fresh" and cfg.gamma == 0.97
    mc = parse_config("environment: mountaincar\nagent: sarsa_lambda_tc\n")
    assert (mc.schedule.phase1, mc.schedule.phase3, mc.schedule.episode_cap) == (200_000, 40_000, 500)
    assert mc.default_mode == "shuffled_pretrain" and mc.eval.deadline == 150


def test_alpha_mult_scales_step_size():
    cfg = parse_config("environment: gridworld\nagent: mb_vi\nalpha_mult: 0.1\n")
    assert cfg.methods[0].agent_config(cfg.gamma).alpha == pytest.approx(0.02)
    assert cfg.schedule.phase1_for(cfg.methods[0]) == 1_000_000


@pytest.mark.parametrize("text,needle", [
    ("environment: gridworld\nagent: muzero\n", "registered agents"),
    ("environment: atari\nagent: mb_vi\n", "unknown environment"),
    ("environment: gridworld\nagent: mb_vi\nfoo: 1\n", "'foo'"),
    ("environment: gridworld\nagent: mb_vi\nschedule: {phase4: 1}\n", "schedule.phase4"),
    ("environment: gridworld\nagent: mb_vi\nruns: 0\n", "runs"),
    ("environment: gridworld\nagent: mb_vi\ns_mult: 0\n", "s_mult"),
    ("environment: gridworld\nagent: mb_vi\nalpha_mult: 0\n", "alpha_mult"),
    ("environment: gridworld\nagent: mb_vi\noverrides: {alpha: 2.0}\n", "alpha"),
    ("environment: gridworld\nagent: sarsa_lambda_tc\n", "cannot run"),
    ("environment: gridworld\nagent: mb_vi\nbaseline: q_learning\n", "baseline"),
    ("environment: gridworld\n", "agent"),
])
def test_validation_errors_name_the_key(text, needle):
    with pytest.raises(ValidationError, match=needle):
        parse_config(text)


def test_parse_error():
    with pytest.raises(ParseError):
        parse_config("environment: [unclosed\n")


def test_shipped_configs_parse():
    for name in ("table1", "table2", "mountaincar", "quick"):
        cfg = load_config(f"configs/{name}.yaml")
        assert parse_config(cfg.dump()) == cfg


# -- aggregation -------------------------------------------------------------

def test_aggregate_examples():
    a = aggregate([2, 2, 2])
    assert (a.mean, a.stderr) == (2.0, 0.0)
    a = aggregate([1, 3])
    assert (a.mean, a.stderr) == (2.0, 1.0)
    a = aggregate([0, 0, 0, 4])
    assert (a.mean, a.stderr) == (1.0, 1.0)
    assert aggregate([7.5]).stderr == 0.0
    with pytest.raises(EmptyInput):
        aggregate([])


@given(st.lists(st.floats(0, 1e5), min_size=1, max_size=30))
def test_aggregate_matches_direct_formula(xs):
    a = aggregate(xs)
    mean, se = oracles.mean_and_stderr(xs)
    assert a.mean == pytest.approx(mean, rel=1e-12, abs=1e-12)
    assert a.stderr == pytest.approx(se, rel=1e-12, abs=1e-9)


# -- suite execution and persistence -----------------------------------------

def test_suite_records(tiny):
    cfg, records = tiny
    assert [(r.method, r.run_index) for r in records] == [
        (m.id, i) for m in cfg.methods for i in range(2)]
    assert all(r.seed == 3 + r.run_index for r in records)
    assert all(len(r.curve_loca) == 10 and len(r.curve_default) == 10 for r in records)


def test_write_and_load_round_trip(tiny, tmp_path):
    cfg, records = tiny
    write_results(records, tmp_path, cfg)
    cfg2, records2 = load_results(tmp_path)
    assert cfg2 == cfg
    assert records2 == records
    curves = read_curves(tmp_path / CURVES)
    assert curves[("mb_vi", "loca")][1].points == records[3].curve_loca.points
    text = (tmp_path / SUMMARY).read_text(encoding="utf-8")
    assert text.endswith("\n")
    rows = list(csv.DictReader(text.splitlines()))
    assert [r["method"] for r in rows] == [m.id for m in cfg.methods]
    assert rows[0]["relative_gain"] in ("1.000000", "")
    assert (tmp_path / SNAPSHOT).read_text(encoding="utf-8").endswith("\n")


def test_byte_identical_reruns(tiny, tmp_path):
    cfg, records = tiny
    write_results(records, tmp_path / "a", cfg)
    write_results(run_suite(cfg), tmp_path / "b", cfg)
    for name in (CURVES, SUMMARY, SNAPSHOT):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_workers_match_serial(tiny):
    cfg, records = tiny
    assert run_suite(cfg, workers=2) == records


def test_different_seeds_differ():
    cfg = parse_config("environment: gridworld\nagent: mb_vi\nschedule: {phase1: 2000, phase2: 300, phase3: 20000}\n")
    regrets = {runner.run_one(cfg, cfg.methods[0], i).default_regret for i in range(4)}
    assert len(regrets) > 1


def test_mountaincar_suite_smoke():
    cfg = parse_config("""
environment: mountaincar
agent: sarsa_lambda_tc
schedule: {phase1: 1500, phase2: 300, phase3: 1000}
runs: 1
""")
    (rec,) = run_suite(cfg)
    assert rec.curve_loca.steps == [500, 1000] and rec.curve_default.steps == [500, 1000]
    assert run_suite(cfg) == [rec]


def test_failing_run_aborts_suite(monkeypatch):
    cfg = parse_config(TINY)
    real = runner.run_one

    def flaky(cfg, method, run_index):
        if method.agent == "mb_vi":
            raise RuntimeError("boom")
        return real(cfg, method, run_index)

    monkeypatch.setattr(runner, "run_one", flaky)
    with pytest.raises(SuiteError) as err:
        run_suite(cfg, workers=1)
    assert err.value.completed == [("q_learning", 0), ("q_learning", 1)]


def test_mbvi_summary_renders_zero_and_inf(tmp_path):
    cfg = parse_config(TINY)
    flat = EvalCurve([EvalPoint(100 * (i + 1), 1.0) for i in range(10)], 1000)
    slow = EvalCurve([EvalPoint(100 * (i + 1), 0.5) for i in range(10)], 1000)
    recs = [runner.RunRecord(m.id, 0, 3, flat if m.agent == "mb_vi" else slow, slow,
                             0.0 if m.agent == "mb_vi" else 500.0, 500.0) for m in cfg.methods]
    write_results(recs, tmp_path, cfg)
    rows = {r["method"]: r for r in csv.DictReader((tmp_path / SUMMARY).read_text().splitlines())}
    assert rows["mb_vi"]["loca_regret"] == "0.000000" and rows["mb_vi"]["gain"] == "inf"
    assert rows["q_learning"]["relative_gain"] == "1.000000"


# -- reporting ---------------------------------------------------------------

def test_render_table(tiny):
    cfg, records = tiny
    summaries = summarize(records, cfg)
    table = render_table(summaries, "q_learning")
    lines = table.strip().splitlines()
    assert len(lines) == 2 + len(cfg.methods)
    # Model-free block first.
    assert lines[2].startswith("| Q-learning") and lines[3].startswith("| Sarsa(0.95)")
    assert lines[4].startswith("| MB-VI")
    with pytest.raises(MissingBaseline):
        render_table(summaries, "mb_su")


def test_render_table_cells():
    from loca.harness.results import AggregateStats, MethodSummary
    q = MethodSummary("q_learning", "Q-learning", "q_learning", AggregateStats(68250, 1000, 10),
                      AggregateStats(39520, 500, 10), 68250 / 39520, 1.0)
    vi = MethodSummary("mb_vi", "MB-VI", "mb_vi", AggregateStats(5000, 0, 10), AggregateStats(0, 0, 10),
                       math.inf, math.inf)
    table = render_table([vi, q], "q_learning")
    assert "| Q-learning | 68.25 | (1.00) | 39.52 | (0.50) | 1.00 |" in table
    assert "| MB-VI | 5.00 | (0.00) | 0.00 | (0.00) | ∞ |" in table


def test_svg_curves(tmp_path):
    flat = EvalCurve([EvalPoint(100 * (i + 1), 1.0) for i in range(10)], 1000)
    rising = EvalCurve([EvalPoint(100 * (i + 1), i / 9) for i in range(10)], 1000)
    path = tmp_path / "c.svg"
    text = emit_svg_curves({"mb_vi": flat, "sarsa": rising}, path=path)
    root = ET.parse(path).getroot()
    assert text == path.read_text(encoding="utf-8")
    ns = "{http://www.w3.org/2000/svg}"
    lines = root.findall(f"{ns}polyline")
    assert len(lines) == 2
    ys = {pt.split(",")[1] for pt in lines[0].get("points").split()}
    assert len(ys) == 1
    top_grid = [el for el in root.findall(f"{ns}line") if el.get("x1") == "60" and el.get("y1") == el.get("y2")]
    assert ys.pop() in {el.get("y1") for el in top_grid}
    legend = [el.text for el in root.findall(f"{ns}text")]
    assert "mb_vi" in legend and "sarsa" in legend
    with pytest.raises(ValueError):
        emit_svg_curves({})


# -- command line ------------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    cfg_path = tmp_path / "tiny.yaml"
    cfg_path.write_text(TINY.replace("runs: 2", "runs: 1"), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / CURVES).exists()
    assert "| Q-learning" in capsys.readouterr().out
    assert main(["report", "--in", str(out)]) == 0
    assert main(["report", "--in", str(out), "--baseline", "nope"]) == 1
    assert main(["plot", "--in", str(out), "--out", str(tmp_path / "c.svg")]) == 0
    ET.parse(tmp_path / "c.svg")
    assert main(["list"]) == 0
    assert "mb_vi" in capsys.readouterr().out

    bad = tmp_path / "bad.yaml"
    bad.write_text("environment: gridworld\nagent: muzero\n", encoding="utf-8")
    assert main(["run", "--config", str(bad)]) == 1
    assert "muzero" in capsys.readouterr().err
    assert main(["run", "--config", str(cfg_path), "--runs", "0"]) == 1

    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--config", str(cfg_path), "--out", str(blocker / "sub")]) == 2
    assert main(["report", "--in", str(tmp_path / "missing")]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 2
