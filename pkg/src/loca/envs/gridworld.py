"""The 25x4 two-terminal gridworld.

Cells are indexed ``y * width + x`` with ``y = 0`` the bottom row. T2 sits
off the left edge of column 0 and T1 off the right edge of the last column.
The last column is a one-way region: Left there is a no-op, so an agent
started in it only ever sees that column and T1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from loca.core import (
    EnvDescriptor,
    Env,
    InitSpec,
    SteppedTerminal,
    StepOutcome,
    Task,
    TerminalTag,
    TransitionTables,
    UnsupportedInit,
)
from loca.rng import RngStream

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTION_NAMES = ("up", "down", "left", "right")
# Action relabelling for the shuffled variant of task A: every action does
# something other than its usual effect.
SHUFFLED_ACTIONS = (DOWN, UP, RIGHT, LEFT)


@dataclass(frozen=True)
class GridSpec:
    width: int = 25
    height: int = 4
    eval_column: int = 12
    gamma: float = 0.97
    reward_t1_a: float = 4.0
    reward_t1_b: float = 1.0
    reward_t2: float = 2.0

    @property
    def passage_column(self) -> int:
        # Right from here crosses into the one-way column.
        return self.width - 2


class Gridworld(Env):
    def __init__(self, task: Task | str = Task.A, spec: GridSpec = GridSpec()):
        task = Task(task)
        if task not in (Task.A, Task.B):
            raise ValueError(f"gridworld task must be A or B, got {task.value}")
        self.task = task
        self.spec = spec
        self.gamma = spec.gamma
        self.n_cells = spec.width * spec.height
        self.descriptor = EnvDescriptor(action_count=4, task=task, state_count=self.n_cells)
        self.reward_t1 = spec.reward_t1_a if task == Task.A else spec.reward_t1_b

    def cell(self, x: int, y: int) -> int:
        return y * self.spec.width + x

    def coords(self, s: int) -> tuple[int, int]:
        return s % self.spec.width, s // self.spec.width

    def reset(self, init: InitSpec, rng: RngStream) -> int:
        w, h = self.spec.width, self.spec.height
        if init == InitSpec.FULL_TRAIN:
            return rng.integers(self.n_cells)
        if init == InitSpec.LOCAL_T1:
            return self.cell(w - 1, rng.integers(h))
        if init == InitSpec.EVAL_MID:
            return self.cell(self.spec.eval_column, rng.integers(h))
        raise UnsupportedInit(f"gridworld has no initial distribution {init!r}")

    @cached_property
    def _tables(self) -> TransitionTables:
        nxt = np.empty((self.n_cells, 4), dtype=np.int32)
        rew = np.empty((self.n_cells, 4))
        for s in range(self.n_cells):
            for a in range(4):
                out = self.step(s, a)
                nxt[s, a], rew[s, a] = out.next, out.reward
        w, h = self.spec.width, self.spec.height
        starts = {
            InitSpec.FULL_TRAIN: np.arange(self.n_cells, dtype=np.int32),
            InitSpec.LOCAL_T1: np.array([self.cell(w - 1, y) for y in range(h)], dtype=np.int32),
            InitSpec.EVAL_MID: np.array([self.cell(self.spec.eval_column, y) for y in range(h)], dtype=np.int32),
        }
        return TransitionTables(nxt, rew, starts)

    def transition_tables(self) -> TransitionTables:
        return self._tables

    def step(self, s: int, a: int, rng: RngStream = None) -> StepOutcome:
        if not 0 <= a < 4:
            self._check_action(a)
        if s >= self.n_cells or s < 0:
            raise SteppedTerminal(f"state {s} is absorbing")
        w, h = self.spec.width, self.spec.height
        x, y = s % w, s // w
        if a == RIGHT:
            if x == w - 1:
                return StepOutcome(self.n_cells + TerminalTag.T1, self.reward_t1, TerminalTag.T1)
            x += 1
        elif a == LEFT:
            if x == 0:
                return StepOutcome(self.n_cells + TerminalTag.T2, self.spec.reward_t2, TerminalTag.T2)
            if x != w - 1:
                x -= 1
        elif a == UP:
            if y < h - 1:
                y += 1
        else:
            if y > 0:
                y -= 1
        return StepOutcome(y * w + x, 0.0, None)


def gridworld_new(task: Task | str) -> Gridworld:
    return Gridworld(task)
