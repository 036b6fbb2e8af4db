"""The LoCA experiment engine.

A LoCA run trains one agent through three phases (task A everywhere, task B
near T1 only, task B everywhere) and, during the last phase, periodically
measures the *top-terminal fraction*: the share of greedy evaluation
episodes, started midway between the terminals, that reach T2 before a
deadline. Regret sums the shortfall of that fraction from 1, weighted by
the training steps between evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from loca import kernels
from loca.agents.base import Agent
from loca.agents.tabular import MBSU, MBVI, NStepModel, QLearning, SarsaLambda
from loca.core import Env, InitSpec, LocaError, StateMultiplier, Task, TerminalTag
from loca.rng import RngStream

_COMPILED_AGENTS = (SarsaLambda, QLearning, MBVI, MBSU, NStepModel)


class EmptyCurve(LocaError):
    pass


class UndefinedBaseline(LocaError):
    pass


@dataclass(frozen=True)
class PhaseSpec:
    task: Task
    init: InitSpec
    steps: int
    learning: bool = True
    episode_cap: int = 100
    epsilon: float = 0.1
    # When set, epsilon decays geometrically from ``epsilon`` to this value over the phase.
    epsilon_final: Optional[float] = None

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError(f"phase steps must be positive, got {self.steps}")
        if self.episode_cap <= 0:
            raise ValueError(f"episode cap must be positive, got {self.episode_cap}")

    def epsilon_at(self, step_in_phase: int) -> float:
        if self.epsilon_final is None:
            return self.epsilon
        decay = (self.epsilon_final / self.epsilon) ** (1.0 / self.steps)
        return self.epsilon * decay ** step_in_phase


@dataclass(frozen=True)
class EvalConfig:
    delta_train: int = 100
    episodes: int = 10
    deadline: int = 40

    def __post_init__(self):
        if self.delta_train <= 0 or self.deadline <= 0 or self.episodes <= 0:
            raise ValueError("delta_train, episodes and deadline must all be positive")


@dataclass(frozen=True)
class EvalPoint:
    step: int
    fraction: float


@dataclass
class EvalCurve:
    points: list[EvalPoint] = field(default_factory=list)
    horizon: int = 0

    @property
    def steps(self) -> list[int]:
        return [p.step for p in self.points]

    @property
    def fractions(self) -> list[float]:
        return [p.fraction for p in self.points]

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RegretReport:
    default_regret: float
    loca_regret: float
    gain: float
    relative_gain: Optional[float] = None


def evaluate(agent: Agent, env: Env, cfg: EvalConfig, rng: RngStream) -> float:
    """Top-terminal fraction of greedy episodes from the mid-state distribution."""
    hits = 0
    for _ in range(cfg.episodes):
        s = env.reset(InitSpec.EVAL_MID, rng)
        for _ in range(cfg.deadline):
            out = env.step(s, agent.greedy_action(s, rng), rng)
            if out.terminal is not None:
                hits += out.terminal == TerminalTag.T2
                break
            s = out.next
    return hits / cfg.episodes


def _unwrap_tables(env: Env):
    """``(tables, multiplier, noise stream)`` for table-driven envs, else None."""
    m, noise = 1, None
    if isinstance(env, StateMultiplier):
        env, m, noise = env.base, env.m, env.noise
    tables = env.transition_tables()
    return None if tables is None else (tables, m, noise)


def _compiled_args(agent, env, phase, eval_cfg, eval_env) -> Optional[dict]:
    """Arguments for the compiled loop, or None if this agent/env pair needs the Python loop."""
    if kernels.run_tabular_phase is None or type(agent) not in _COMPILED_AGENTS:
        return None
    train = _unwrap_tables(env)
    if train is None or agent.n_states != env.descriptor.state_count:
        return None
    tables, m, noise = train
    if phase.init not in tables.starts:
        return None
    args = dict(nxt=tables.next, rew=tables.reward, m=m, starts=tables.starts[phase.init],
                train_noise=noise, delta_train=0)
    if eval_cfg is not None:
        target = _unwrap_tables(eval_env)
        if target is None or target[1] != m or InitSpec.EVAL_MID not in target[0].starts:
            return None
        et = target[0]
        if et is not tables and not (np.array_equal(et.next, tables.next)
                                     and np.array_equal(et.reward, tables.reward)):
            return None
        args.update(delta_train=eval_cfg.delta_train, eval_starts=et.starts[InitSpec.EVAL_MID],
                    eval_episodes=eval_cfg.episodes, deadline=eval_cfg.deadline, eval_noise=target[2])
    return args


def run_phase(agent: Agent, env: Env, phase: PhaseSpec, rng: RngStream,
              eval_cfg: Optional[EvalConfig] = None, eval_env: Optional[Env] = None,
              eval_rng: Optional[RngStream] = None, compiled: bool = True) -> Optional[EvalCurve]:
    """Interact for ``phase.steps`` environment steps.

    With ``eval_cfg`` the agent is evaluated after every ``delta_train``
    steps; the running training episode is suspended, not reset.
    ``compiled=False`` forces the Python loop; otherwise tabular agents on
    table-driven environments run in the compiled loop, which gives
    identical results.
    """
    if eval_cfg is not None and (eval_env is None or eval_rng is None):
        raise ValueError("evaluation needs an evaluation environment and stream")
    args = _compiled_args(agent, env, phase, eval_cfg, eval_env) if compiled else None
    agent.learning = phase.learning
    curve = EvalCurve(horizon=phase.steps) if eval_cfg is not None else None
    if args is not None:
        decay = 0.0
        if phase.epsilon_final is not None:
            decay = (phase.epsilon_final / phase.epsilon) ** (1.0 / phase.steps)
        points = kernels.run_tabular_phase(
            agent, agent.name, train_rng=rng, steps=phase.steps, cap=phase.episode_cap,
            eps0=phase.epsilon, decay=decay, eval_rng=eval_rng, **args,
        )
        if curve is not None:
            curve.points.extend(EvalPoint(t, f) for t, f in points)
        return curve
    delta = eval_cfg.delta_train if eval_cfg is not None else 0
    decaying = phase.epsilon_final is not None
    agent.epsilon = phase.epsilon
    cap, init = phase.episode_cap, phase.init
    s = None
    a = k = 0
    for t in range(1, phase.steps + 1):
        if decaying:
            agent.epsilon = phase.epsilon_at(t - 1)
        if s is None:
            s = env.reset(init, rng)
            a = agent.begin_episode(s, rng)
            k = 0
        out = env.step(s, a, rng)
        k += 1
        a = agent.step(out.reward, out.next, out.terminal, rng)
        if out.terminal is not None or k >= cap:
            agent.end_episode()
            s = None
        else:
            s = out.next
        if delta and t % delta == 0:
            curve.points.append(EvalPoint(t, evaluate(agent, eval_env, eval_cfg, eval_rng)))
    if s is not None:
        agent.end_episode()
    return curve


EnvFactory = Callable[[Task], Env]
AgentFactory = Callable[[], Agent]


def loca_schedule(phase1: int, phase2: int, phase3: int, episode_cap: int,
                  epsilon: float = 0.1, phase1_epsilon: Optional[tuple[float, float]] = None) -> list[PhaseSpec]:
    p1_eps, p1_final = phase1_epsilon if phase1_epsilon is not None else (epsilon, None)
    return [
        PhaseSpec(Task.A, InitSpec.FULL_TRAIN, phase1, True, episode_cap, p1_eps, p1_final),
        PhaseSpec(Task.B, InitSpec.LOCAL_T1, phase2, True, episode_cap, epsilon),
        PhaseSpec(Task.B, InitSpec.FULL_TRAIN, phase3, True, episode_cap, epsilon),
    ]


def run_loca(agent_factory: AgentFactory, env_factory: EnvFactory, schedule: Sequence[PhaseSpec],
             eval_cfg: EvalConfig, rng: RngStream, compiled: bool = True) -> EvalCurve:
    p1, p2, p3 = schedule
    if (p1.task, p1.init) != (Task.A, InitSpec.FULL_TRAIN):
        raise ValueError("phase 1 must train on task A from the full-train distribution")
    if (p2.task, p2.init) != (Task.B, InitSpec.LOCAL_T1):
        raise ValueError("phase 2 must train on task B from the local-T1 distribution")
    if p3.task != Task.B:
        raise ValueError("phase 3 must train on task B")
    agent = agent_factory()
    train = rng.substream("train")
    eval_rng = rng.substream("eval")
    run_phase(agent, env_factory(Task.A), p1, train, compiled=compiled)
    run_phase(agent, env_factory(Task.B), p2, train, compiled=compiled)
    env_b = env_factory(Task.B)
    eval_env = env_b.for_evaluation(eval_rng.substream("env"))
    return run_phase(agent, env_b, p3, train, eval_cfg, eval_env, eval_rng, compiled=compiled)


def run_default(agent_factory: AgentFactory, env_factory: EnvFactory, phase3: PhaseSpec,
                eval_cfg: EvalConfig, rng: RngStream, pretrain: Optional[PhaseSpec] = None,
                compiled: bool = True) -> EvalCurve:
    """Phase 3 without LoCA pretraining.

    ``pretrain=None`` starts from the agent's initialization ("fresh");
    otherwise the agent first trains on ``pretrain.task`` (normally the
    shuffled-action variant of task A, from which nothing transfers).
    """
    agent = agent_factory()
    train = rng.substream("train")
    eval_rng = rng.substream("eval")
    if pretrain is not None:
        run_phase(agent, env_factory(pretrain.task), pretrain, train, compiled=compiled)
    env_b = env_factory(Task.B)
    eval_env = env_b.for_evaluation(eval_rng.substream("env"))
    return run_phase(agent, env_b, phase3, train, eval_cfg, eval_env, eval_rng, compiled=compiled)


def regret(curve: EvalCurve, delta_train: int) -> float:
    """Step-weighted shortfall ``sum_i (1 - f_i) * delta_train`` up to the horizon."""
    if not curve.points:
        raise EmptyCurve("regret of an empty curve")
    horizon = curve.horizon if curve.horizon else math.inf
    return float(sum((1.0 - p.fraction) * delta_train for p in curve.points if p.step <= horizon))


def gain(default_regret: float, loca_regret: float) -> float:
    if default_regret < 0 or loca_regret < 0:
        raise ValueError("regrets must be non-negative")
    return math.inf if loca_regret == 0 else default_regret / loca_regret


def gains(default_regret: float, loca_regret: float, baseline_default: float,
          baseline_loca: float) -> tuple[float, float]:
    """``(gain, relative gain)`` of a method against a baseline method."""
    g = gain(default_regret, loca_regret)
    base = gain(baseline_default, baseline_loca)
    if base == 0 or math.isinf(base):
        raise UndefinedBaseline(f"baseline gain is {base}")
    return g, g / base
