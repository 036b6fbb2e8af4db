"""Tile-coded true-online Sarsa(lambda) for Mountain Car."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from loca import kernels
from loca.agents.base import Agent, AgentConfig, eps_greedy_action
from loca.core import EnvDescriptor, LocaError
from loca.envs.mountaincar import V_MAX, V_MIN, X_MAX, X_MIN


class OutOfBounds(LocaError):
    pass


@dataclass(frozen=True)
class TileCoder:
    """Grid tilings over (position, velocity), tiling ``k`` shifted by ``k/n`` of a tile.

    Each tiling has ``tiles x tiles`` cells; points pushed past the last
    cell by the shift land in the last cell.
    """

    n_tilings: int = 10
    tiles: int = 10
    x_range: tuple[float, float] = (X_MIN, X_MAX)
    v_range: tuple[float, float] = (V_MIN, V_MAX)

    @property
    def size(self) -> int:
        return self.n_tilings * self.tiles * self.tiles

    def indices(self, x: float, v: float, out: np.ndarray | None = None) -> np.ndarray:
        (xl, xh), (vl, vh) = self.x_range, self.v_range
        if not (xl <= x <= xh and vl <= v <= vh):
            raise OutOfBounds(f"({x}, {v}) outside {self.x_range} x {self.v_range}")
        if out is None:
            out = np.empty(self.n_tilings, dtype=np.intp)
        kernels.tile_indices(x, v, xl, xh, vl, vh, self.n_tilings, self.tiles, out)
        return out


def tile_features(x: float, v: float, coder: TileCoder = TileCoder()) -> np.ndarray:
    return coder.indices(x, v)


@dataclass(frozen=True)
class EpsSchedule:
    phase1_steps: int = 200_000
    start: float = 1.0
    end: float = 0.01
    fixed: float = 0.1

    @property
    def decay(self) -> float:
        return (self.end / self.start) ** (1.0 / self.phase1_steps)

    def eps_at(self, phase: Union[int, str], step_in_phase: int) -> float:
        if phase == "eval":
            return 0.0
        if phase == 1:
            return self.start * self.decay ** step_in_phase
        return self.fixed


def eps_at(schedule: EpsSchedule, phase: Union[int, str], step_in_phase: int) -> float:
    return schedule.eps_at(phase, step_in_phase)


def true_online_sarsa_linear_step(w: np.ndarray, z: np.ndarray, q_old: float, x: np.ndarray, reward: float,
                                  x_next: np.ndarray | None, alpha: float, gamma: float, lam: float,
                                  n_active: int = 10) -> float:
    """True-online Sarsa(lambda) update for binary features, in place.

    ``x`` and ``x_next`` are active-index arrays into ``w``; ``x_next`` is
    None on a terminal transition. The per-feature step size is
    ``alpha / n_active``. Returns the new ``q_old``.
    """
    q = kernels.sum_at(w, x, 0)
    q_next = 0.0 if x_next is None else kernels.sum_at(w, x_next, 0)
    delta = reward + gamma * q_next - q
    kernels.true_online_update(w, z, x, alpha / n_active, gamma * lam, delta, q, q_old)
    return q_next


class LinearSarsaLambda(Agent):
    name = "sarsa_lambda_tc"

    def __init__(self, descriptor: EnvDescriptor, cfg: AgentConfig, coder: TileCoder = TileCoder()):
        if descriptor.tabular:
            raise ValueError("sarsa_lambda_tc needs a continuous environment")
        self.cfg = cfg
        self.coder = coder
        self.n_actions = descriptor.action_count
        self.gamma = cfg.gamma
        self.alpha = cfg.alpha
        self.epsilon = cfg.epsilon
        self.learning = True
        self.w = np.zeros(self.n_actions * coder.size)
        self.z = np.zeros_like(self.w)
        self.q_old = 0.0
        self._phi = np.empty(coder.n_tilings, dtype=np.intp)
        self._x = np.empty(coder.n_tilings, dtype=np.intp)
        self._qs = np.empty(self.n_actions)
        self._has_x = False

    def q_values(self, s) -> np.ndarray:
        """Action values at ``s``; leaves the active tiles in ``self._phi``."""
        self.coder.indices(s[0], s[1], self._phi)
        size = self.coder.size
        for a in range(self.n_actions):
            self._qs[a] = kernels.sum_at(self.w, self._phi, a * size)
        return self._qs

    def begin_episode(self, s, rng):
        self.z[:] = 0.0
        self.q_old = 0.0
        qs = self.q_values(s)
        a = eps_greedy_action(qs, self.epsilon, rng)
        np.add(self._phi, a * self.coder.size, out=self._x)
        self._has_x = True
        return a

    def step(self, reward, s_next, terminal, rng):
        if terminal is None:
            qs = self.q_values(s_next)
            a_next = eps_greedy_action(qs, self.epsilon, rng)
            q_next = float(qs[a_next])
        else:
            a_next, q_next = None, 0.0
        if self.learning:
            q = kernels.sum_at(self.w, self._x, 0)
            delta = reward + self.gamma * q_next - q
            kernels.true_online_update(
                self.w, self.z, self._x, self.alpha / self.coder.n_tilings,
                self.gamma * self.cfg.lam, delta, q, self.q_old,
            )
        self.q_old = q_next
        if a_next is None:
            self._has_x = False
        else:
            np.add(self._phi, a_next * self.coder.size, out=self._x)
        return a_next

    def greedy_action(self, s, rng):
        phi = np.empty(self.coder.n_tilings, dtype=np.intp)
        self.coder.indices(s[0], s[1], phi)
        size = self.coder.size
        qs = [kernels.sum_at(self.w, phi, a * size) for a in range(self.n_actions)]
        return eps_greedy_action(qs, 0.0, rng)

    def _learned_fields(self):
        return {"w": self.w}

    def _episodic_fields(self):
        return {"z": self.z, "q_old": self.q_old, "x": self._x.copy() if self._has_x else None}
