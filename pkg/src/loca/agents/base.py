from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from loca.core import State, TerminalTag
from loca.rng import RngStream


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 0.05
    epsilon: float = 0.1
    gamma: float = 0.97
    lam: float = 0.0
    n: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")

    def scaled(self, alpha_mult: float) -> "AgentConfig":
        return replace(self, alpha=self.alpha * alpha_mult)


def eps_greedy_action(qvalues: Sequence[float], epsilon: float, rng: RngStream) -> int:
    """Epsilon-greedy choice; ties in the argmax are broken uniformly."""
    qs = qvalues.tolist() if isinstance(qvalues, np.ndarray) else list(qvalues)
    n = len(qs)
    if epsilon > 0.0 and rng.random() < epsilon:
        return rng.integers(n)
    best = max(qs)
    ties = [i for i in range(n) if qs[i] == best]
    if len(ties) == 1:
        return ties[0]
    return ties[rng.integers(len(ties))]


class Agent:
    """Interaction contract used by the protocol runner.

    An episode is ``begin_episode`` followed by ``step`` calls until the
    environment terminates or the runner truncates it, then ``end_episode``.
    ``greedy_action`` must not change any learned or episodic state.
    """

    name = "agent"
    learning: bool = True
    epsilon: float = 0.1

    def begin_episode(self, s: State, rng: RngStream) -> int:
        raise NotImplementedError

    def step(self, reward: float, s_next: State, terminal: Optional[TerminalTag], rng: RngStream) -> Optional[int]:
        raise NotImplementedError

    def end_episode(self) -> None:
        pass

    def greedy_action(self, s: State, rng: RngStream) -> int:
        raise NotImplementedError

    def _learned_fields(self) -> dict:
        raise NotImplementedError

    def _episodic_fields(self) -> dict:
        return {}

    def learned_hash(self) -> str:
        """Digest of the learned parameters only (tables, models, weights)."""
        return _digest(self._learned_fields())

    def state_hash(self) -> str:
        """Digest of everything, including mid-episode bookkeeping."""
        fields = dict(self._learned_fields())
        fields.update({f"episode.{k}": v for k, v in self._episodic_fields().items()})
        return _digest(fields)


def _digest(fields: dict) -> str:
    h = hashlib.sha256()
    for key, value in sorted(fields.items()):
        h.update(key.encode())
        if isinstance(value, np.ndarray):
            h.update(str(value.dtype).encode())
            h.update(np.ascontiguousarray(value).tobytes())
        else:
            h.update(repr(value).encode())
    return h.hexdigest()
