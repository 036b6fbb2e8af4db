"""Mountain Car with a second terminal at the bottom of the valley.

T1 is the usual goal at the top of the right hill. T2 is a small ellipse
around the valley floor at rest. Right of ``forced_zone`` every action acts
as push-right, so the cart cannot leave the neighbourhood of T1 once there
with non-negative velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from loca.core import (
    EnvDescriptor,
    Env,
    InitSpec,
    SteppedTerminal,
    StepOutcome,
    Task,
    TerminalTag,
    UnsupportedInit,
)
from loca.rng import RngStream

PUSH_LEFT, NOOP, PUSH_RIGHT = 0, 1, 2

X_MIN, X_MAX = -1.2, 0.5
V_MIN, V_MAX = -0.07, 0.07
FORCE = 0.001
GRAVITY = 0.0025

# Shuffled pretraining task: 0 -> no-op, 1 -> push right, 2 -> push left.
SHUFFLED_ACTIONS = (NOOP, PUSH_RIGHT, PUSH_LEFT)


@dataclass(frozen=True)
class MountainCarSpec:
    forced_zone: float = 0.4
    t2_center: float = -0.52
    t2_radius: float = 0.07
    gamma: float = 0.997
    reward_t1_a: float = 4.0
    reward_t1_b: float = 1.0
    reward_t2: float = 2.0
    mixture_p: float = 0.5


def mc_dynamics(x: float, v: float, a_eff: int) -> tuple[float, float]:
    v = v + FORCE * (a_eff - 1) - GRAVITY * math.cos(3.0 * x)
    v = min(max(v, V_MIN), V_MAX)
    x = x + v
    if x <= X_MIN:
        x = X_MIN
        v = 0.0
    elif x > X_MAX:
        x = X_MAX
    return x, v


def mc_t2_contains(x: float, v: float, center: float = -0.52, radius: float = 0.07) -> bool:
    dx = x - center
    dv = 10.0 * v
    return dx * dx + dv * dv < radius * radius


class MountainCar(Env):
    def __init__(self, task: Task | str = Task.A, spec: MountainCarSpec = MountainCarSpec()):
        task = Task(task)
        if task not in (Task.A, Task.B):
            raise ValueError(f"mountain car task must be A or B, got {task.value}")
        self.task = task
        self.spec = spec
        self.gamma = spec.gamma
        self.reward_t1 = spec.reward_t1_a if task == Task.A else spec.reward_t1_b
        self.descriptor = EnvDescriptor(
            action_count=3, task=task, bounds=((X_MIN, X_MAX), (V_MIN, V_MAX))
        )

    def is_absorbing(self, s) -> bool:
        x, v = s
        return x >= X_MAX or mc_t2_contains(x, v, self.spec.t2_center, self.spec.t2_radius)

    def reset(self, init: InitSpec, rng: RngStream) -> tuple[float, float]:
        if init == InitSpec.FULL_TRAIN:
            # Starts drawn inside T2 are redrawn; episodes need a non-absorbing start.
            while True:
                if rng.random() < self.spec.mixture_p:
                    s = rng.uniform(X_MIN, X_MAX), rng.uniform(V_MIN, V_MAX)
                else:
                    s = rng.uniform(-1.0, 0.0), rng.uniform(-0.03, 0.03)
                if not self.is_absorbing(s):
                    return s
        if init == InitSpec.LOCAL_T1:
            return rng.uniform(self.spec.forced_zone, X_MAX), rng.uniform(0.0, V_MAX)
        if init == InitSpec.EVAL_MID:
            return rng.uniform(-0.2, -0.15), rng.uniform(-0.005, 0.005)
        raise UnsupportedInit(f"mountain car has no initial distribution {init!r}")

    def step(self, s: tuple[float, float], a: int, rng: RngStream = None) -> StepOutcome:
        self._check_action(a)
        x, v = s
        if self.is_absorbing(s):
            raise SteppedTerminal(f"state {s} is absorbing")
        a_eff = PUSH_RIGHT if x > self.spec.forced_zone else a
        x, v = mc_dynamics(x, v, a_eff)
        if x >= X_MAX:
            return StepOutcome((x, v), self.reward_t1, TerminalTag.T1)
        if mc_t2_contains(x, v, self.spec.t2_center, self.spec.t2_radius):
            return StepOutcome((x, v), self.spec.reward_t2, TerminalTag.T2)
        return StepOutcome((x, v), 0.0, None)


def mountaincar_new(task: Task | str) -> MountainCar:
    return MountainCar(task)
