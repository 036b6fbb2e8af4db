"""Agents, registered by the names used in experiment configs."""

from loca.agents.base import Agent, AgentConfig, eps_greedy_action
from loca.agents.linear import EpsSchedule, LinearSarsaLambda, TileCoder, tile_features
from loca.agents.tabular import (
    MBSU,
    MBVI,
    NStepModel,
    QLearning,
    SarsaLambda,
    TabularModel,
    q_from_model,
    value_iteration,
)

AGENTS = {
    "sarsa_lambda": SarsaLambda,
    "q_learning": QLearning,
    "mb_vi": MBVI,
    "mb_su": MBSU,
    "nstep_model": NStepModel,
    "sarsa_lambda_tc": LinearSarsaLambda,
}

DEFAULTS = {
    "sarsa_lambda": dict(alpha=0.05, lam=0.95),
    # One-step backups need a larger step than Sarsa's traced updates to
    # adapt at a comparable rate.
    "q_learning": dict(alpha=0.2),
    "mb_vi": dict(alpha=0.2),
    "mb_su": dict(alpha=0.2),
    "nstep_model": dict(alpha=0.04, n=1),
    # Divided by the 10 tilings inside the update: 0.05 per active feature.
    "sarsa_lambda_tc": dict(alpha=0.5, lam=0.9),
}

MODEL_FREE = ("sarsa_lambda", "sarsa_lambda_tc", "q_learning")


def default_config(name: str, gamma: float, **overrides) -> AgentConfig:
    if name not in AGENTS:
        raise ValueError(f"unknown agent {name!r}; registered agents: {', '.join(sorted(AGENTS))}")
    params = dict(epsilon=0.1, gamma=gamma)
    params.update(DEFAULTS[name])
    params.update(overrides)
    return AgentConfig(**params)


def make_agent(name: str, descriptor, cfg: AgentConfig) -> Agent:
    if name not in AGENTS:
        raise ValueError(f"unknown agent {name!r}; registered agents: {', '.join(sorted(AGENTS))}")
    return AGENTS[name](descriptor, cfg)


__all__ = [
    "AGENTS",
    "Agent",
    "AgentConfig",
    "DEFAULTS",
    "EpsSchedule",
    "LinearSarsaLambda",
    "MBSU",
    "MBVI",
    "MODEL_FREE",
    "NStepModel",
    "QLearning",
    "SarsaLambda",
    "TabularModel",
    "TileCoder",
    "default_config",
    "eps_greedy_action",
    "make_agent",
    "q_from_model",
    "tile_features",
    "value_iteration",
]
