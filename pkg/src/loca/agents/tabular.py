"""Tabular agents: true-online Sarsa(lambda), Q-learning, and three model learners.

All model learners share :class:`TabularModel`, an exponential-moving-average
estimate of the next-outcome distribution and expected reward for every
state-action pair. Outcome indices ``0..S-1`` are states, ``S`` is T1 and
``S + 1`` is T2; value vectors carry two trailing zeros for the terminals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from loca import kernels
from loca.agents.base import Agent, AgentConfig, eps_greedy_action
from loca.core import EnvDescriptor, LocaError, TerminalTag
from loca.rng import RngStream

OPTIMISTIC_VALUE = 4.0


class CalledMidEpisode(LocaError):
    pass


def _outcome(n_states: int, s_next: int, terminal: Optional[TerminalTag]) -> int:
    return n_states + int(terminal) if terminal is not None else s_next


class TabularModel:
    """Sparse per-(state, action) outcome distribution and reward estimate.

    ``optimistic=True`` starts every row with all mass on T1 and a reward
    of 4; otherwise rows start empty (all-zero) with reward 0.
    """

    def __init__(self, n_states: int, n_actions: int, optimistic: bool = True, capacity: int = 4):
        self.n_states = n_states
        self.n_actions = n_actions
        rows = n_states * n_actions
        self.succ = np.zeros((rows, capacity), dtype=np.int32)
        self.prob = np.zeros((rows, capacity), dtype=np.float64)
        self.nnz = np.zeros(rows, dtype=np.int32)
        self.rhat = np.zeros(rows, dtype=np.float64)
        # Number of times a row gained a successor; planners key caches on it.
        self.appends = 0
        if optimistic:
            self.succ[:, 0] = n_states + TerminalTag.T1
            self.prob[:, 0] = 1.0
            self.nnz[:] = 1
            self.rhat[:] = OPTIMISTIC_VALUE

    @property
    def n_outcomes(self) -> int:
        return self.n_states + 2

    def _grow(self) -> None:
        rows, cap = self.succ.shape
        succ = np.zeros((rows, 2 * cap), dtype=np.int32)
        prob = np.zeros((rows, 2 * cap), dtype=np.float64)
        succ[:, :cap] = self.succ
        prob[:, :cap] = self.prob
        self.succ, self.prob = succ, prob

    def update(self, s: int, a: int, outcome: int, reward: float, alpha: float) -> None:
        row = s * self.n_actions + a
        res = kernels.model_update(self.succ, self.prob, self.nnz, self.rhat, row, outcome, reward, alpha)
        while res == 0:
            self._grow()
            res = kernels.model_update(self.succ, self.prob, self.nnz, self.rhat, row, outcome, reward, alpha)
        if res == 2:
            self.appends += 1

    def distribution(self, s: int, a: int) -> np.ndarray:
        row = s * self.n_actions + a
        out = np.zeros(self.n_outcomes)
        n = self.nnz[row]
        np.add.at(out, self.succ[row, :n], self.prob[row, :n])
        return out

    def reward(self, s: int, a: int) -> float:
        return float(self.rhat[s * self.n_actions + a])

    def row_sums(self) -> np.ndarray:
        return self.prob.sum(axis=1)

    def hash_fields(self, prefix: str) -> dict:
        # Capacity growth is an implementation detail; hash only live entries.
        mask = np.arange(self.succ.shape[1])[None, :] < self.nnz[:, None]
        return {
            f"{prefix}.succ": np.where(mask, self.succ, -1),
            f"{prefix}.prob": np.where(mask, self.prob, 0.0),
            f"{prefix}.rhat": self.rhat,
        }


def model_ema_update(model: TabularModel, s: int, a: int, reward: float, outcome: int, alpha: float) -> TabularModel:
    model.update(s, a, outcome, reward, alpha)
    return model


@dataclass
class ValueTable:
    values: np.ndarray  # length n_states + 2, terminals last and always 0
    sweeps: int
    delta: float
    converged: bool


def value_iteration(model: TabularModel, gamma: float, theta: float = 1e-6, max_sweeps: int = 1000,
                    v0: Optional[np.ndarray] = None) -> ValueTable:
    v = np.zeros(model.n_outcomes) if v0 is None else v0
    scratch = np.empty(model.n_states)
    sweeps, delta = kernels.value_iteration(
        model.succ, model.prob, model.nnz, model.rhat, v,
        model.n_states, model.n_actions, gamma, theta, max_sweeps, scratch,
    )
    return ValueTable(v, sweeps, delta, delta < theta)


def q_from_model(model: TabularModel, v: np.ndarray, s: int, gamma: float, n: int = 1) -> np.ndarray:
    out = np.empty(model.n_actions)
    kernels.q_values(model.succ, model.prob, model.nnz, model.rhat, v, s, model.n_actions, gamma ** n, out)
    return out


class _TabularBase(Agent):
    def __init__(self, descriptor: EnvDescriptor, cfg: AgentConfig):
        if not descriptor.tabular:
            raise ValueError(f"{self.name} needs a tabular environment")
        self.cfg = cfg
        self.n_states = descriptor.state_count
        self.n_actions = descriptor.action_count
        self.gamma = cfg.gamma
        self.alpha = cfg.alpha
        self.epsilon = cfg.epsilon
        self.learning = True
        self._s: Optional[int] = None
        self._a: Optional[int] = None

    def _episodic_fields(self) -> dict:
        return {"s": self._s, "a": self._a}


class SarsaLambda(_TabularBase):
    """True-online Sarsa(lambda) with dutch traces over a one-hot table."""

    name = "sarsa_lambda"

    def __init__(self, descriptor: EnvDescriptor, cfg: AgentConfig):
        super().__init__(descriptor, cfg)
        self.q = np.full((self.n_states, self.n_actions), OPTIMISTIC_VALUE)
        self.z = np.zeros(self.q.size)
        self.q_old = 0.0
        self._w = self.q.reshape(-1)
        self._idx = np.zeros(1, dtype=np.intp)

    def begin_episode(self, s, rng):
        self.z[:] = 0.0
        self.q_old = 0.0
        self._s = s
        self._a = eps_greedy_action(self.q[s], self.epsilon, rng)
        return self._a

    def step(self, reward, s_next, terminal, rng):
        if terminal is None:
            a_next = eps_greedy_action(self.q[s_next], self.epsilon, rng)
            q_next = float(self.q[s_next, a_next])
        else:
            a_next, q_next = None, 0.0
        if self.learning:
            self.learn(self._s, self._a, reward, q_next)
        self.q_old = q_next
        self._s, self._a = s_next, a_next
        return a_next

    def learn(self, s: int, a: int, reward: float, q_next: float) -> None:
        q_sa = self.q[s, a]
        delta = reward + self.gamma * q_next - q_sa
        self._idx[0] = s * self.n_actions + a
        kernels.true_online_update(
            self._w, self.z, self._idx, self.alpha, self.gamma * self.cfg.lam, delta, q_sa, self.q_old
        )

    def greedy_action(self, s, rng):
        return eps_greedy_action(self.q[s], 0.0, rng)

    def _learned_fields(self):
        return {"q": self.q}

    def _episodic_fields(self):
        return {"z": self.z, "q_old": self.q_old, **super()._episodic_fields()}


def sarsa_dutch_step(q: np.ndarray, z: np.ndarray, q_old: float, s: int, a: int, reward: float,
                     s_next: int, a_next: int, terminal: bool, cfg: AgentConfig) -> float:
    """One true-online Sarsa(lambda) update of ``q`` and trace ``z`` in place.

    Returns the new ``q_old``, the pre-update value of ``(s_next, a_next)``.
    """
    n_actions = q.shape[1]
    q_next = 0.0 if terminal else float(q[s_next, a_next])
    q_sa = float(q[s, a])
    delta = reward + cfg.gamma * q_next - q_sa
    idx = np.array([s * n_actions + a], dtype=np.intp)
    kernels.true_online_update(q.reshape(-1), z.reshape(-1), idx, cfg.alpha, cfg.gamma * cfg.lam, delta, q_sa, q_old)
    return q_next


def q_learning_step(q: np.ndarray, s: int, a: int, reward: float, s_next: int, terminal: bool,
                    cfg: AgentConfig) -> np.ndarray:
    target = reward if terminal else reward + cfg.gamma * float(q[s_next].max())
    q[s, a] += cfg.alpha * (target - q[s, a])
    return q


class QLearning(_TabularBase):
    name = "q_learning"

    def __init__(self, descriptor: EnvDescriptor, cfg: AgentConfig):
        super().__init__(descriptor, cfg)
        self.q = np.full((self.n_states, self.n_actions), OPTIMISTIC_VALUE)

    def begin_episode(self, s, rng):
        self._s = s
        self._a = eps_greedy_action(self.q[s], self.epsilon, rng)
        return self._a

    def step(self, reward, s_next, terminal, rng):
        if self.learning:
            q_learning_step(self.q, self._s, self._a, reward, s_next, terminal is not None, self.cfg)
        if terminal is not None:
            self._s = self._a = None
            return None
        self._s = s_next
        self._a = eps_greedy_action(self.q[s_next], self.epsilon, rng)
        return self._a

    def greedy_action(self, s, rng):
        return eps_greedy_action(self.q[s], 0.0, rng)

    def _learned_fields(self):
        return {"q": self.q}


class _ModelAgent(_TabularBase):
    optimistic = True

    def __init__(self, descriptor: EnvDescriptor, cfg: AgentConfig):
        super().__init__(descriptor, cfg)
        self.model = TabularModel(self.n_states, self.n_actions, optimistic=self.optimistic)
        self.v = np.zeros(self.n_states + 2)
        self._q = np.empty(self.n_actions)

    def _qs(self, s: int, discount: float) -> np.ndarray:
        m = self.model
        kernels.q_values(m.succ, m.prob, m.nnz, m.rhat, self.v, s, self.n_actions, discount, self._q)
        return self._q

    def greedy_action(self, s, rng):
        return eps_greedy_action(self._qs(s, self.gamma), 0.0, rng)

    def _learned_fields(self):
        return {"v": self.v, **self.model.hash_fields("model")}


class MBVI(_ModelAgent):
    """Model learner that replans with value iteration (to ``theta``) after every step.

    Planning sweeps only states whose backup can have changed since the last
    plan: the updated state and, transitively, predecessors of states whose
    value moved. Every other state already equals its own backup, so the
    result is the same as sweeping the whole table.
    """

    name = "mb_vi"
    theta = 1e-6
    max_sweeps = 1000

    def __init__(self, descriptor: EnvDescriptor, cfg: AgentConfig):
        super().__init__(descriptor, cfg)
        S = self.n_states
        self._scratch = np.empty(S)
        self._dirty = np.ones(S, dtype=np.uint8)
        self._queue = np.arange(S, dtype=np.int32)
        self._changed = np.empty(S, dtype=np.int32)
        self._n_dirty = S
        self._pred_ptr = np.zeros(S + 3, dtype=np.int32)
        self._pred_idx = np.empty(0, dtype=np.int32)
        self._pred_version = -1
        self.last_plan = self.plan()

    def _rebuild_predecessors(self) -> None:
        m = self.model
        need = int(m.nnz.sum())
        if self._pred_idx.size < need:
            self._pred_idx = np.empty(2 * need, dtype=np.int32)
        kernels.build_predecessors(m.succ, m.nnz, self.n_states, self.n_actions, self._pred_ptr, self._pred_idx)
        self._pred_version = m.appends

    def mark_dirty(self, s: int) -> None:
        if not self._dirty[s]:
            self._dirty[s] = 1
            self._queue[self._n_dirty] = s
            self._n_dirty += 1

    def plan(self) -> tuple[int, float]:
        m = self.model
        if m.appends != self._pred_version:
            self._rebuild_predecessors()
        sweeps, delta, self._n_dirty = kernels.plan_incremental(
            m.succ, m.prob, m.nnz, m.rhat, self.v, self.n_states, self.n_actions,
            self.gamma, self.theta, self.max_sweeps, self._scratch,
            self._dirty, self._queue, self._changed, self._n_dirty, self._pred_ptr, self._pred_idx,
        )
        return sweeps, delta

    def begin_episode(self, s, rng):
        self._s = s
        self._a = eps_greedy_action(self._qs(s, self.gamma), self.epsilon, rng)
        return self._a

    def step(self, reward, s_next, terminal, rng):
        if self.learning:
            self.model.update(self._s, self._a, _outcome(self.n_states, s_next, terminal), reward, self.alpha)
            self.mark_dirty(self._s)
            self.last_plan = self.plan()
        if terminal is not None:
            self._s = self._a = None
            return None
        return self.begin_episode(s_next, rng)


class MBSU(_ModelAgent):
    """Model learner that backs up only the current state before acting."""

    name = "mb_su"

    def backup(self, s: int) -> None:
        self.v[s] = self._qs(s, self.gamma).max()

    def begin_episode(self, s, rng):
        if self.learning:
            self.backup(s)
        self._s = s
        self._a = eps_greedy_action(self._qs(s, self.gamma), self.epsilon, rng)
        return self._a

    def step(self, reward, s_next, terminal, rng):
        if self.learning:
            self.model.update(self._s, self._a, _outcome(self.n_states, s_next, terminal), reward, self.alpha)
        if terminal is not None:
            self._s = self._a = None
            return None
        return self.begin_episode(s_next, rng)


class NStepModel(_ModelAgent):
    """On-policy n-step model learner with a conservative state-value update.

    The model predicts the state ``n`` steps ahead under the behaviour
    policy and the discounted reward collected on the way; it is refit from
    the episode's samples when the episode ends.
    """

    name = "nstep_model"
    optimistic = False

    def __init__(self, descriptor: EnvDescriptor, cfg: AgentConfig):
        super().__init__(descriptor, cfg)
        self.n = cfg.n
        self.discount_n = self.gamma ** self.n
        # (state, action, reward) per step; the reward slot is filled by step().
        self.buffer: list[list] = []
        self.final_outcome: Optional[int] = None
        self.terminated = False
        self.pending = False

    def _act(self, s: int, rng: RngStream) -> int:
        qs = self._qs(s, self.discount_n)
        if self.learning:
            self.v[s] = (1.0 - self.alpha) * self.v[s] + self.alpha * qs.max()
        a = eps_greedy_action(qs, self.epsilon, rng)
        self.buffer.append([s, a, 0.0])
        self.pending = True
        self._s, self._a = s, a
        return a

    def begin_episode(self, s, rng):
        self.buffer = []
        self.final_outcome = None
        self.terminated = False
        return self._act(s, rng)

    def step(self, reward, s_next, terminal, rng):
        self.buffer[-1][2] = reward
        self.pending = False
        self.final_outcome = _outcome(self.n_states, s_next, terminal)
        if terminal is not None:
            self.terminated = True
            self._s = self._a = None
            return None
        return self._act(s_next, rng)

    def greedy_action(self, s, rng):
        return eps_greedy_action(self._qs(s, self.discount_n), 0.0, rng)

    def end_episode(self):
        if self.learning:
            self.finalize(truncated=not self.terminated)
        self.buffer = []
        self.pending = False

    def finalize(self, truncated: bool = False) -> None:
        """Refit the n-step model from the finished episode's samples."""
        if not (self.terminated or truncated):
            raise CalledMidEpisode("the episode has not ended")
        # After a truncation the last action was chosen but never taken.
        samples = self.buffer[:-1] if self.pending else self.buffer
        fit_nstep_model(self.model, samples, self.final_outcome, self.terminated,
                        self.n, self.gamma, self.alpha)

    def _episodic_fields(self):
        return {
            "buffer": [tuple(x) for x in self.buffer],
            "final": (self.final_outcome, self.terminated, self.pending),
            **super()._episodic_fields(),
        }


def nstep_episode_finalize(agent: NStepModel, truncated: bool = False) -> NStepModel:
    agent.finalize(truncated=truncated)
    agent.buffer = []
    agent.pending = False
    return agent


def fit_nstep_model(model: TabularModel, samples: list, final_outcome: Optional[int], terminated: bool,
                    n: int, gamma: float, alpha: float) -> None:
    """Exponential-moving-average refit of ``model`` toward n-step targets.

    ``samples[t] = (S_t, A_t, R_t)`` for ``t < T``; ``final_outcome`` is
    ``S_T``. Past the end of a terminated episode the target is the terminal
    and rewards are 0; truncated episodes skip steps whose target lies
    beyond ``S_T``.
    """
    T = len(samples)
    rewards = [float(x[2]) for x in samples]
    for t in range(T):
        if t + n < T:
            target = samples[t + n][0]
        elif t + n == T or terminated:
            target = final_outcome
        else:
            continue
        ret = 0.0
        for k in range(min(n, T - t) - 1, -1, -1):
            ret = rewards[t + k] + gamma * ret
        model.update(samples[t][0], samples[t][1], target, ret, alpha)
