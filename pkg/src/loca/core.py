"""Environment abstraction shared by the gridworld and Mountain Car tasks.

Environments are immutable descriptions: ``reset`` and ``step`` take the
current state and an :class:`~loca.rng.RngStream` explicitly, so the same
environment object can serve training and evaluation without sharing any
random state.

Tabular states are plain ints in ``range(state_count)``; the two absorbing
terminals are the reserved indices ``state_count`` (T1) and
``state_count + 1`` (T2). Continuous states are ``(position, velocity)``
tuples and terminals are signalled only by the outcome's tag.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from loca.rng import RngStream

State = Any  # int for tabular environments, (x, v) tuple for continuous ones


class LocaError(Exception):
    """Base class for errors raised by this package."""


class UnsupportedInit(LocaError):
    pass


class InvalidAction(LocaError):
    pass


class SteppedTerminal(LocaError):
    pass


class NotTabular(LocaError):
    pass


class InvalidPermutation(LocaError):
    pass


class TerminalTag(enum.IntEnum):
    """T1 carries the task-dependent reward; T2's reward is the same in both tasks."""

    T1 = 0
    T2 = 1


class InitSpec(str, enum.Enum):
    FULL_TRAIN = "full_train"
    LOCAL_T1 = "local_t1"
    EVAL_MID = "eval_mid"


class Task(str, enum.Enum):
    A = "A"
    B = "B"
    SHUFFLED_A = "ShuffledA"


@dataclass(frozen=True)
class StepOutcome:
    next: State
    reward: float
    terminal: Optional[TerminalTag] = None

    @property
    def done(self) -> bool:
        return self.terminal is not None


@dataclass(frozen=True)
class EnvDescriptor:
    action_count: int
    task: Task
    state_count: Optional[int] = None  # None for continuous environments
    bounds: Optional[tuple[tuple[float, float], ...]] = None

    def __post_init__(self):
        if self.action_count < 2:
            raise ValueError("action_count must be >= 2")
        if self.state_count is not None and self.state_count < 2:
            raise ValueError("state_count must be >= 2")

    @property
    def tabular(self) -> bool:
        return self.state_count is not None


@dataclass(frozen=True)
class TransitionTables:
    """Complete description of a deterministic tabular environment.

    ``next[s, a]`` is the successor cell, or ``S + tag`` when the move
    terminates; ``starts[init]`` lists the equally likely initial cells in
    the order a reset indexes them.
    """

    next: np.ndarray
    reward: np.ndarray
    starts: dict


class Env:
    """Interface implemented by every environment and wrapper."""

    descriptor: EnvDescriptor
    gamma: float

    def reset(self, init: InitSpec, rng: RngStream) -> State:
        raise NotImplementedError

    def step(self, s: State, a: int, rng: RngStream) -> StepOutcome:
        raise NotImplementedError

    def is_absorbing(self, s: State) -> bool:
        d = self.descriptor
        return d.tabular and isinstance(s, int) and s >= d.state_count

    def for_evaluation(self, rng: RngStream) -> "Env":
        """Copy of this environment whose internal noise comes from ``rng``."""
        return self

    def transition_tables(self) -> Optional[TransitionTables]:
        """Tables for deterministic tabular environments; None otherwise."""
        return None

    def _check_action(self, a: int) -> None:
        if not 0 <= a < self.descriptor.action_count:
            raise InvalidAction(f"action {a} outside range({self.descriptor.action_count})")


class StateMultiplier(Env):
    """Tabular wrapper that appends an irrelevant uniform feature to the state.

    The wrapped index is ``base * m + u`` with ``u`` redrawn on every reset
    and every step from the wrapper's own stream.
    """

    def __init__(self, base: Env, m: int, noise: RngStream):
        if not base.descriptor.tabular:
            raise NotTabular("state multiplier requires a tabular environment")
        if m < 1:
            raise ValueError(f"multiplier must be >= 1, got {m}")
        self.base = base
        self.m = int(m)
        self.noise = noise
        self.gamma = base.gamma
        d = base.descriptor
        self.base_count = d.state_count
        self.descriptor = EnvDescriptor(
            action_count=d.action_count, task=d.task, state_count=d.state_count * self.m
        )

    def _lift(self, base_state: int) -> int:
        return base_state * self.m + self.noise.integers(self.m)

    def reset(self, init: InitSpec, rng: RngStream) -> int:
        return self._lift(self.base.reset(init, rng))

    def step(self, s: int, a: int, rng: RngStream) -> StepOutcome:
        if self.is_absorbing(s):
            raise SteppedTerminal(f"state {s} is absorbing")
        out = self.base.step(s // self.m, a, rng)
        if out.terminal is not None:
            return StepOutcome(self.descriptor.state_count + int(out.terminal), out.reward, out.terminal)
        return StepOutcome(self._lift(out.next), out.reward, None)

    def for_evaluation(self, rng: RngStream) -> "StateMultiplier":
        return StateMultiplier(self.base.for_evaluation(rng), self.m, rng.substream("state-multiplier"))


class ActionShuffle(Env):
    """Wrapper whose action ``a`` acts as ``perm[a]`` in the base environment."""

    def __init__(self, base: Env, perm: Sequence[int]):
        n = base.descriptor.action_count
        perm = tuple(int(p) for p in perm)
        if len(perm) != n or sorted(perm) != list(range(n)):
            raise InvalidPermutation(f"{perm} is not a permutation of range({n})")
        self.base = base
        self.perm = perm
        self.gamma = base.gamma
        d = base.descriptor
        self.descriptor = EnvDescriptor(
            action_count=n, task=Task.SHUFFLED_A if d.task == Task.A else d.task,
            state_count=d.state_count, bounds=d.bounds,
        )

    def reset(self, init: InitSpec, rng: RngStream) -> State:
        return self.base.reset(init, rng)

    def step(self, s: State, a: int, rng: RngStream) -> StepOutcome:
        self._check_action(a)
        return self.base.step(s, self.perm[a], rng)

    def is_absorbing(self, s: State) -> bool:
        return self.base.is_absorbing(s)

    def for_evaluation(self, rng: RngStream) -> "ActionShuffle":
        return ActionShuffle(self.base.for_evaluation(rng), self.perm)

    def transition_tables(self) -> Optional[TransitionTables]:
        base = self.base.transition_tables()
        if base is None:
            return None
        cols = list(self.perm)
        return TransitionTables(np.ascontiguousarray(base.next[:, cols]),
                                np.ascontiguousarray(base.reward[:, cols]), base.starts)


def wrap_state_multiplier(env: Env, m: int, rng: RngStream) -> Env:
    return StateMultiplier(env, m, rng.substream("state-multiplier"))


def wrap_action_shuffle(env: Env, perm: Sequence[int]) -> Env:
    return ActionShuffle(env, perm)


def inverse_permutation(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)
