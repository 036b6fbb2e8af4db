"""Experiment configuration: a YAML document with nested sections.

Schema (every key optional except ``environment`` and one of ``agent`` /
``methods``; unknown keys are rejected)::

    environment: gridworld          # or mountaincar
    agent: mb_vi                    # shortcut for a one-entry ``methods`` list
    s_mult: 1                       # shortcut-level multipliers and overrides
    alpha_mult: 1.0
    overrides: {}
    methods:                        # or several methods compared in one suite
      - agent: mb_su
        s_mult: 10
        alpha_mult: 1.0
        overrides: {alpha: 0.2}     # AgentConfig fields: alpha, epsilon, gamma, lam, n
        label: MB-SU, S x10         # display name; defaults to a generated one
    schedule:
      phase1: 100000
      phase2: 5000
      phase3: 50000
      episode_cap: 100
      epsilon: 0.1
      phase1_epsilon: null          # [start, end] for a geometric decay over phase 1
      scale_phase1: true            # phase 1 x max(s_mult, 1 / alpha_mult)
    eval: {delta_train: 100, episodes: 10, deadline: 40}
    default_mode: fresh             # or shuffled_pretrain
    runs: 10
    seed: 0
    baseline: q_learning            # method id used for relative gains
    workers: 1
    out: results

Environment-dependent defaults (cap, deadline, Delta_train, phase lengths,
discount, epsilon schedule, default mode) come from :data:`ENV_DEFAULTS`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from loca.agents import AGENTS, AgentConfig, default_config
from loca.core import LocaError
from loca.envs import ENVIRONMENTS


class ParseError(LocaError):
    pass


class ValidationError(LocaError):
    pass


ENV_DEFAULTS = {
    "gridworld": dict(
        gamma=0.97, phase1=100_000, phase2=5_000, phase3=50_000, episode_cap=100,
        phase1_epsilon=None, delta_train=100, deadline=40, default_mode="fresh",
    ),
    "mountaincar": dict(
        gamma=0.997, phase1=200_000, phase2=5_000, phase3=40_000, episode_cap=500,
        phase1_epsilon=(1.0, 0.01), delta_train=500, deadline=150, default_mode="shuffled_pretrain",
    ),
}

DEFAULT_MODES = ("fresh", "shuffled_pretrain")
_OVERRIDE_KEYS = ("alpha", "epsilon", "gamma", "lam", "n")
_DISPLAY = {
    "sarsa_lambda": "Sarsa({lam:g})",
    "sarsa_lambda_tc": "Sarsa({lam:g})",
    "q_learning": "Q-learning",
    "mb_vi": "MB-VI",
    "mb_su": "MB-SU",
    "nstep_model": "{n}-step model",
}


@dataclass(frozen=True)
class MethodSpec:
    agent: str
    s_mult: int = 1
    alpha_mult: float = 1.0
    overrides: dict = field(default_factory=dict)
    label: Optional[str] = None

    @property
    def id(self) -> str:
        """Stable identifier: agent name plus any non-default knobs."""
        parts = [f"{k}={v}" for k, v in sorted(self.overrides.items())]
        if self.s_mult != 1:
            parts.append(f"s_mult={self.s_mult}")
        if self.alpha_mult != 1:
            parts.append(f"alpha_mult={self.alpha_mult:g}")
        return self.agent + (f"[{','.join(parts)}]" if parts else "")

    def agent_config(self, gamma: float) -> AgentConfig:
        params = {"gamma": gamma, **self.overrides}
        return default_config(self.agent, **params).scaled(self.alpha_mult)

    def display(self, gamma: float) -> str:
        if self.label:
            return self.label
        cfg = default_config(self.agent, **{"gamma": gamma, **self.overrides})
        name = _DISPLAY[self.agent].format(lam=cfg.lam, n=cfg.n)
        if self.alpha_mult != 1:
            name += f", alpha_mult = {self.alpha_mult:g}"
        if self.s_mult != 1:
            name += f", s_mult = {self.s_mult}"
        return name


@dataclass(frozen=True)
class ScheduleSpec:
    phase1: int
    phase2: int
    phase3: int
    episode_cap: int
    epsilon: float = 0.1
    phase1_epsilon: Optional[tuple[float, float]] = None
    scale_phase1: bool = True

    def phase1_for(self, method: MethodSpec) -> int:
        if not self.scale_phase1:
            return self.phase1
        return int(round(self.phase1 * max(method.s_mult, 1.0 / method.alpha_mult, 1.0)))


@dataclass(frozen=True)
class EvalSpec:
    delta_train: int
    episodes: int = 10
    deadline: int = 40


@dataclass(frozen=True)
class ExperimentConfig:
    environment: str
    methods: tuple[MethodSpec, ...]
    schedule: ScheduleSpec
    eval: EvalSpec
    default_mode: str
    runs: int = 10
    seed: int = 0
    baseline: Optional[str] = None
    workers: int = 1
    out: str = "results"

    @property
    def gamma(self) -> float:
        return ENV_DEFAULTS[self.environment]["gamma"]

    def method(self, method_id: str) -> MethodSpec:
        for m in self.methods:
            if m.id == method_id:
                return m
        raise KeyError(method_id)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = [
            {k: v for k, v in m.items() if not (k == "label" and v is None)} for m in d["methods"]
        ]
        s = d["schedule"]
        if s["phase1_epsilon"] is not None:
            s["phase1_epsilon"] = list(s["phase1_epsilon"])
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)


# -- validation helpers -------------------------------------------------------

def _section(doc: Any, where: str) -> dict:
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: expected a mapping, got {type(doc).__name__}")
    return doc


def _reject_unknown(doc: dict, allowed, where: str) -> None:
    for key in doc:
        if key not in allowed:
            prefix = f"{where}." if where else ""
            raise ValidationError(f"unknown key '{prefix}{key}'")


def _int(doc: dict, key: str, default, where: str, minimum: int) -> int:
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{where}{key}: expected an integer, got {v!r}")
    if v < minimum:
        raise ValidationError(f"{where}{key}: must be >= {minimum}, got {v}")
    return v


def _float(doc: dict, key: str, default, where: str) -> float:
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValidationError(f"{where}{key}: expected a finite number, got {v!r}")
    return float(v)


def _method(doc: Any, where: str) -> MethodSpec:
    if isinstance(doc, str):
        doc = {"agent": doc}
    doc = _section(doc, where)
    _reject_unknown(doc, ("agent", "s_mult", "alpha_mult", "overrides", "label"), where)
    agent = doc.get("agent")
    if agent not in AGENTS:
        raise ValidationError(
            f"{where}.agent: unknown agent {agent!r}; registered agents: {', '.join(sorted(AGENTS))}"
        )
    s_mult = _int(doc, "s_mult", 1, f"{where}.", 1)
    alpha_mult = _float(doc, "alpha_mult", 1.0, f"{where}.")
    if alpha_mult <= 0:
        raise ValidationError(f"{where}.alpha_mult: must be > 0, got {alpha_mult:g}")
    overrides = dict(_section(doc.get("overrides"), f"{where}.overrides"))
    _reject_unknown(overrides, _OVERRIDE_KEYS, f"{where}.overrides")
    label = doc.get("label")
    if label is not None and not isinstance(label, str):
        raise ValidationError(f"{where}.label: expected a string")
    return MethodSpec(agent, s_mult, alpha_mult, overrides, label)


_TOP_KEYS = ("environment", "agent", "s_mult", "alpha_mult", "overrides", "label", "methods", "schedule",
             "eval", "default_mode", "runs", "seed", "baseline", "workers", "out")


def config_from_dict(doc: Any) -> ExperimentConfig:
    doc = _section(doc, "config")
    _reject_unknown(doc, _TOP_KEYS, "")
    env = doc.get("environment")
    if env not in ENVIRONMENTS:
        raise ValidationError(
            f"environment: unknown environment {env!r}; registered: {', '.join(sorted(ENVIRONMENTS))}"
        )
    env_def = ENV_DEFAULTS[env]

    shortcut = {k: doc[k] for k in ("agent", "s_mult", "alpha_mult", "overrides", "label") if k in doc}
    if "methods" in doc and shortcut:
        raise ValidationError(f"'{next(iter(shortcut))}' cannot be combined with 'methods'")
    if "methods" in doc:
        raw = doc["methods"]
        if not isinstance(raw, list) or not raw:
            raise ValidationError("methods: expected a non-empty list")
        methods = tuple(_method(m, f"methods[{i}]") for i, m in enumerate(raw))
    elif "agent" in shortcut:
        methods = (_method(shortcut, "config"),)
    else:
        raise ValidationError("config must name an 'agent' or a 'methods' list")
    ids = [m.id for m in methods]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise ValidationError(f"methods: duplicate method {sorted(dup)[0]!r}")
    tabular = env == "gridworld"
    for i, m in enumerate(methods):
        is_tc = m.agent == "sarsa_lambda_tc"
        if is_tc == tabular:
            raise ValidationError(f"methods[{i}].agent: {m.agent} cannot run on {env}")
        if m.s_mult != 1 and not tabular:
            raise ValidationError(f"methods[{i}].s_mult: state multiplier needs a tabular environment")
        try:
            m.agent_config(env_def["gamma"])
        except ValueError as e:
            raise ValidationError(f"methods[{i}].overrides: {e}") from None

    sd = _section(doc.get("schedule"), "schedule")
    _reject_unknown(sd, ("phase1", "phase2", "phase3", "episode_cap", "epsilon", "phase1_epsilon",
                         "scale_phase1"), "schedule")
    p1_eps = sd.get("phase1_epsilon", env_def["phase1_epsilon"])
    if p1_eps is not None:
        if not (isinstance(p1_eps, (list, tuple)) and len(p1_eps) == 2
                and all(isinstance(x, (int, float)) and 0 < x <= 1 for x in p1_eps)):
            raise ValidationError("schedule.phase1_epsilon: expected [start, end] with values in (0, 1]")
        p1_eps = (float(p1_eps[0]), float(p1_eps[1]))
    eps = _float(sd, "epsilon", 0.1, "schedule.")
    if not 0 <= eps <= 1:
        raise ValidationError(f"schedule.epsilon: must lie in [0, 1], got {eps:g}")
    scale = sd.get("scale_phase1", True)
    if not isinstance(scale, bool):
        raise ValidationError("schedule.scale_phase1: expected true or false")
    schedule = ScheduleSpec(
        phase1=_int(sd, "phase1", env_def["phase1"], "schedule.", 1),
        phase2=_int(sd, "phase2", env_def["phase2"], "schedule.", 1),
        phase3=_int(sd, "phase3", env_def["phase3"], "schedule.", 1),
        episode_cap=_int(sd, "episode_cap", env_def["episode_cap"], "schedule.", 1),
        epsilon=eps, phase1_epsilon=p1_eps, scale_phase1=scale,
    )

    ed = _section(doc.get("eval"), "eval")
    _reject_unknown(ed, ("delta_train", "episodes", "deadline"), "eval")
    ev = EvalSpec(
        delta_train=_int(ed, "delta_train", env_def["delta_train"], "eval.", 1),
        episodes=_int(ed, "episodes", 10, "eval.", 1),
        deadline=_int(ed, "deadline", env_def["deadline"], "eval.", 1),
    )
    if ev.delta_train > schedule.phase3:
        raise ValidationError("eval.delta_train: larger than schedule.phase3, the curve would be empty")

    mode = doc.get("default_mode", env_def["default_mode"])
    if mode not in DEFAULT_MODES:
        raise ValidationError(f"default_mode: expected one of {', '.join(DEFAULT_MODES)}, got {mode!r}")
    baseline = doc.get("baseline")
    if baseline is None and "q_learning" in ids:
        baseline = "q_learning"
    if baseline is not None and baseline not in ids:
        raise ValidationError(f"baseline: {baseline!r} is not one of the configured methods ({', '.join(ids)})")
    out = doc.get("out", "results")
    if not isinstance(out, str):
        raise ValidationError("out: expected a path string")
    return ExperimentConfig(
        environment=env, methods=methods, schedule=schedule, eval=ev, default_mode=mode,
        runs=_int(doc, "runs", 10, "", 1), seed=_int(doc, "seed", 0, "", 0),
        baseline=baseline, workers=_int(doc, "workers", 1, "", 1), out=out,
    )


def parse_config(text: str) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ParseError(f"malformed config: {e}") from None
    return config_from_dict(doc)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())
