"""Benchmark environments, selectable by name."""

from loca.core import Task, wrap_action_shuffle
from loca.envs import gridworld as _gridworld
from loca.envs import mountaincar as _mountaincar
from loca.envs.gridworld import Gridworld, GridSpec, gridworld_new
from loca.envs.mountaincar import (
    SHUFFLED_ACTIONS,
    MountainCar,
    MountainCarSpec,
    mc_dynamics,
    mc_t2_contains,
    mountaincar_new,
)

ENVIRONMENTS = {
    "gridworld": Gridworld,
    "mountaincar": MountainCar,
}


SHUFFLED_PERMUTATIONS = {
    "gridworld": _gridworld.SHUFFLED_ACTIONS,
    "mountaincar": _mountaincar.SHUFFLED_ACTIONS,
}


def make_env(name: str, task: Task | str):
    """Environment ``name`` for ``task``; ShuffledA is task A behind the action shuffle."""
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; known: {sorted(ENVIRONMENTS)}") from None
    task = Task(task)
    if task == Task.SHUFFLED_A:
        return wrap_action_shuffle(cls(Task.A), SHUFFLED_PERMUTATIONS[name])
    return cls(task)


__all__ = [
    "ENVIRONMENTS",
    "GridSpec",
    "Gridworld",
    "MountainCar",
    "MountainCarSpec",
    "SHUFFLED_ACTIONS",
    "SHUFFLED_PERMUTATIONS",
    "gridworld_new",
    "make_env",
    "mc_dynamics",
    "mc_t2_contains",
    "mountaincar_new",
]
