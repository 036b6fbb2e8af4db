import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loca.agents import AgentConfig, MBSU, MBVI, NStepModel, SarsaLambda, default_config, eps_greedy_action
from loca.agents.tabular import (
    CalledMidEpisode,
    TabularModel,
    fit_nstep_model,
    model_ema_update,
    nstep_episode_finalize,
    q_from_model,
    q_learning_step,
    sarsa_dutch_step,
    value_iteration,
)
from loca.core import EnvDescriptor, InitSpec, Task, TerminalTag
from loca.envs import Gridworld
from loca.rng import RngStream

import oracles

GAMMA = 0.97


def true_model(task):
    env = Gridworld(task)
    t = env.transition_tables()
    m = TabularModel(100, 4)
    for s in range(100):
        for a in range(4):
            m.update(s, a, int(t.next[s, a]), float(t.reward[s, a]), 1.0)
    return m


# -- action selection and configuration -------------------------------------

def test_eps_greedy_examples():
    rng = RngStream(0)
    assert eps_greedy_action([1, 3, 2], 0.0, rng) == 1
    counts = np.bincount([eps_greedy_action([2, 2], 0.0, rng) for _ in range(10_000)], minlength=2)
    assert counts[0] / 10_000 == pytest.approx(0.5, abs=0.02)
    counts = np.bincount([eps_greedy_action([0, 9, 0, 0], 1.0, rng) for _ in range(10_000)], minlength=4)
    assert np.allclose(counts / 10_000, 0.25, atol=0.02)


@pytest.mark.parametrize("field,value", [
    ("alpha", 0.0), ("alpha", 1.5), ("epsilon", -0.1), ("epsilon", 1.1),
    ("gamma", 0.0), ("gamma", 1.0), ("lam", 1.2), ("n", 0),
])
def test_agent_config_validation(field, value):
    with pytest.raises(ValueError):
        AgentConfig(**{field: value})


def test_default_configs():
    assert default_config("sarsa_lambda", GAMMA) == AgentConfig(alpha=0.05, epsilon=0.1, gamma=GAMMA, lam=0.95)
    assert default_config("mb_vi", GAMMA).alpha == 0.2
    assert default_config("nstep_model", GAMMA, n=5).alpha == 0.04
    assert default_config("mb_vi", GAMMA).scaled(0.1).alpha == pytest.approx(0.02)
    with pytest.raises(ValueError):
        default_config("dqn", GAMMA)


# -- Sarsa and Q-learning ----------------------------------------------------

def test_sarsa_dutch_first_terminal_update():
    cfg = AgentConfig(alpha=0.05, gamma=GAMMA, lam=0.95)
    q, z = np.zeros((3, 2)), np.zeros((3, 2))
    sarsa_dutch_step(q, z, 0.0, 1, 0, 2.0, 0, 0, True, cfg)
    assert q[1, 0] == pytest.approx(0.1, abs=1e-15)
    assert np.count_nonzero(q) == 1


def test_sarsa_lambda_zero_collapses_to_one_step_sarsa():
    cfg = AgentConfig(alpha=0.05, gamma=GAMMA, lam=0.0)
    rng = RngStream(4)
    q = np.array([[rng.uniform(-1, 4) for _ in range(4)] for _ in range(10)])
    z = np.zeros_like(q)
    ref = q.copy()
    q_old = 0.0
    for i in range(1000):
        s, a, s2, a2 = rng.integers(10), rng.integers(4), rng.integers(10), rng.integers(4)
        r, term = rng.uniform(-1, 2), rng.random() < 0.1
        if i % 7 == 0:
            z[:] = 0.0
            q_old = 0.0
        target = r + (0.0 if term else GAMMA * ref[s2, a2])
        ref[s, a] += cfg.alpha * (target - ref[s, a])
        q_old = sarsa_dutch_step(q, z, q_old, s, a, r, s2, a2, term, cfg)
        np.testing.assert_allclose(q, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("lam", [0.0, 0.5, 0.95])
def test_sarsa_lambda_agent_matches_dense_oracle(lam):
    """Replay an episode through the agent and a dense one-hot implementation."""
    desc = EnvDescriptor(4, Task.A, 6)
    cfg = AgentConfig(alpha=0.3, epsilon=0.5, gamma=0.9, lam=lam)
    agent = SarsaLambda(desc, cfg)
    agent.q[:] = 0.0
    rng = RngStream(9)
    s = 0
    a = agent.begin_episode(s, rng)
    episode = []
    for t in range(6):
        terminal = TerminalTag.T1 if t == 5 else None
        s_next = (s + a + 1) % 6
        r = float(t % 3)
        x = np.zeros(24)
        x[s * 4 + a] = 1.0
        a_next = agent.step(r, s_next, terminal, rng)
        if a_next is None:
            episode.append((x, r, None))
        else:
            x_next = np.zeros(24)
            x_next[s_next * 4 + a_next] = 1.0
            episode.append((x, r, x_next))
        s, a = s_next, a_next
    w = oracles.true_online_sarsa_dense(episode, 24, 0.3, 0.9, lam)
    np.testing.assert_allclose(agent.q.reshape(-1), w, rtol=0, atol=1e-12)


def test_q_learning_examples():
    cfg = AgentConfig(alpha=0.05, gamma=GAMMA)
    q = np.full((2, 2), 4.0)
    assert q_learning_step(q, 0, 0, 4.0, 1, True, cfg)[0, 0] == 4.0
    assert q_learning_step(q, 0, 1, 1.0, 1, True, cfg)[0, 1] == pytest.approx(3.85)
    q = np.full((2, 2), 4.0)
    q[1] = [2.0, 1.0]
    assert q_learning_step(q, 0, 0, 0.0, 1, False, cfg)[0, 0] == pytest.approx(3.897)


# -- models and planning -----------------------------------------------------

def test_model_ema_examples():
    m = TabularModel(3, 2)
    model_ema_update(m, 0, 1, 2.5, 2, 1.0)
    np.testing.assert_array_equal(m.distribution(0, 1), [0, 0, 1, 0, 0])
    assert m.reward(0, 1) == 2.5
    for k in range(1, 8):
        model_ema_update(m, 1, 0, 0.0, 1, 0.2)
        assert m.distribution(1, 0)[1] == pytest.approx(1 - 0.8 ** k, abs=1e-12)
    np.testing.assert_allclose(m.row_sums(), 1.0, atol=1e-12)


def test_model_rows_stay_normalized():
    rng = RngStream(13)
    m = TabularModel(20, 4)
    zero = TabularModel(20, 4, optimistic=False)
    for _ in range(10_000):
        s, a, o = rng.integers(20), rng.integers(4), rng.integers(22)
        r, alpha = rng.uniform(-1, 4), rng.uniform(0.001, 1.0)
        model_ema_update(m, s, a, r, o, alpha)
        model_ema_update(zero, s, a, r, o, alpha)
    assert np.all(np.abs(m.row_sums() - 1.0) < 1e-9)
    sums = zero.row_sums()
    assert np.all((sums >= 0.0) & (sums <= 1.0 + 1e-12))
    assert np.isfinite(m.rhat).all()


def test_value_iteration_small_examples():
    m = TabularModel(1, 1)
    m.update(0, 0, 2, 2.0, 1.0)  # outcome 2 is T2
    assert value_iteration(m, GAMMA).values[0] == pytest.approx(2.0)
    m = TabularModel(2, 1)
    m.update(0, 0, 1, 0.0, 1.0)
    m.update(1, 0, 3, 2.0, 1.0)
    vt = value_iteration(m, GAMMA)
    assert vt.converged
    np.testing.assert_allclose(vt.values, [1.94, 2.0, 0.0, 0.0], atol=1e-12)


def test_value_iteration_contraction():
    rng = RngStream(2)
    m = TabularModel(15, 3)
    for _ in range(300):
        m.update(rng.integers(15), rng.integers(3), rng.integers(17), rng.uniform(0, 3), 0.5)
    deltas = [value_iteration(m, GAMMA, theta=0.0, max_sweeps=k).delta for k in range(1, 40)]
    assert all(b <= a + 1e-15 for a, b in zip(deltas[1:], deltas[2:]))
    assert not value_iteration(m, GAMMA, theta=0.0, max_sweeps=3).converged


@pytest.mark.parametrize("task,r1", [(Task.A, 4.0), (Task.B, 1.0)])
def test_value_iteration_greedy_policy_matches_oracle(task, r1):
    m = true_model(task)
    vt = value_iteration(m, GAMMA, theta=1e-12, max_sweeps=10_000)
    q_star = oracles.optimal_q(r1, GAMMA)
    np.testing.assert_allclose(vt.values[:100], q_star.max(axis=1), atol=1e-9)
    for s in range(100):
        q = q_from_model(m, vt.values, s, GAMMA)
        np.testing.assert_allclose(q, q_star[s], atol=1e-9)
        best = set(np.flatnonzero(q_star[s] >= q_star[s].max() - 1e-9))
        assert int(np.argmax(q)) in best
    if task == Task.B:
        mid = [Gridworld().cell(12, y) for y in range(4)]
        assert all(int(np.argmax(q_from_model(m, vt.values, s, GAMMA))) == oracles.LEFT for s in mid)


def test_q_from_model_examples():
    m = TabularModel(3, 2)
    np.testing.assert_array_equal(q_from_model(m, np.zeros(5), 0, GAMMA), [4.0, 4.0])
    m.update(0, 0, 1, 0.0, 1.0)
    v = np.array([0.0, 2.0, 1.0, 0.0, 0.0])
    assert q_from_model(m, v, 0, GAMMA)[0] == pytest.approx(1.94)
    m.update(0, 1, 2, 0.5, 1.0)
    assert q_from_model(m, v, 0, GAMMA, n=2)[1] == pytest.approx(1.4409)


# -- model-based agents ------------------------------------------------------

def test_mbvi_planning_equals_full_value_iteration():
    env = Gridworld(Task.B)
    agent = MBVI(env.descriptor, default_config("mb_vi", GAMMA))
    rng = RngStream(6)
    s = env.reset(InitSpec.FULL_TRAIN, rng)
    a = agent.begin_episode(s, rng)
    for _ in range(400):
        out = env.step(s, a)
        v_before = agent.v.copy()
        a = agent.step(out.reward, out.next, out.terminal, rng)
        ref = value_iteration(agent.model, GAMMA, v0=v_before)
        np.testing.assert_array_equal(agent.v, ref.values)
        assert agent.last_plan == (ref.sweeps, ref.delta)
        if a is None:
            s = env.reset(InitSpec.FULL_TRAIN, rng)
            a = agent.begin_episode(s, rng)
        else:
            s = out.next


def test_mbsu_first_backup_and_locality():
    env = Gridworld(Task.B)
    agent = MBSU(env.descriptor, default_config("mb_su", GAMMA, epsilon=0.0))
    agent.backup(7)
    assert agent.v[7] == 4.0
    agent.v[7] = 0.0
    rng = RngStream(1)
    s = env.reset(InitSpec.LOCAL_T1, rng)
    visited = {s}
    a = agent.begin_episode(s, rng)
    while a is not None:
        out = env.step(s, a)
        a = agent.step(out.reward, out.next, out.terminal, rng)
        s = out.next
        if a is not None:
            visited.add(s)
    changed = set(np.flatnonzero(agent.v[:100]))
    assert changed == visited


def test_nstep_first_visit_value():
    env = Gridworld(Task.B)
    agent = NStepModel(env.descriptor, default_config("nstep_model", GAMMA, epsilon=0.0))
    rng = RngStream(0)
    agent.begin_episode(3, rng)
    assert agent.v[3] == 0.0
    for a in range(4):
        agent.model.update(5, a, 101, 2.0, 1.0)
    agent.begin_episode(5, rng)
    np.testing.assert_array_equal(agent._qs(5, agent.discount_n), [2.0] * 4)
    assert agent.v[5] == pytest.approx(0.08, abs=1e-15)


def fit(samples, final, terminated, n, gamma=GAMMA, alpha=1.0):
    m = TabularModel(10, 2, optimistic=False)
    fit_nstep_model(m, samples, final, terminated, n, gamma, alpha)
    return m


def test_nstep_fit_reward_targets():
    samples = [(0, 0, 0.0), (1, 0, 0.0), (2, 0, 2.0)]
    m = fit(samples, 11, True, 2)
    assert [m.reward(s, 0) for s in range(3)] == pytest.approx([0.0, 1.94, 2.0], abs=1e-12)
    np.testing.assert_array_equal(m.distribution(0, 0)[2], 1.0)
    assert m.distribution(1, 0)[11] == 1.0 and m.distribution(2, 0)[11] == 1.0


def test_nstep_fit_long_horizon_targets_terminal():
    samples = [(0, 1, 1.0), (1, 1, 1.0), (2, 1, 1.0)]
    m = fit(samples, 10, True, 5)
    for t, s in enumerate((0, 1, 2)):
        assert m.distribution(s, 1)[10] == 1.0
        expected = sum(GAMMA ** k for k in range(3 - t))
        assert m.reward(s, 1) == pytest.approx(expected, abs=1e-12)


def test_nstep_fit_one_step_targets_are_next_states():
    samples = [(0, 0, 0.0), (4, 1, 0.5), (7, 0, 1.0)]
    m = fit(samples, 9, False, 1)
    assert m.distribution(0, 0)[4] == 1.0 and m.distribution(4, 1)[7] == 1.0
    assert m.distribution(7, 0)[9] == 1.0


def test_nstep_fit_truncated_skips_unseen_targets():
    samples = [(0, 0, 0.0), (1, 0, 0.0), (2, 0, 0.0)]
    m = fit(samples, 3, False, 2)
    assert m.distribution(0, 0)[2] == 1.0
    assert m.distribution(1, 0)[3] == 1.0
    assert m.row_sums()[2 * 2] == 0.0


def test_nstep_consistency_on_chain():
    samples = [(s, 0, 0.0) for s in range(6)]
    m = TabularModel(10, 1, optimistic=False)
    masses = []
    for _ in range(50):
        fit_nstep_model(m, samples, 6, False, 3, GAMMA, 0.04)
        masses.append(m.distribution(0, 0)[3])
    assert all(b > a for a, b in zip(masses, masses[1:]))
    assert masses[-1] == pytest.approx(1 - 0.96 ** 50, abs=1e-12)


def test_nstep_finalize_mid_episode_raises():
    env = Gridworld(Task.B)
    agent = NStepModel(env.descriptor, default_config("nstep_model", GAMMA))
    rng = RngStream(0)
    a = agent.begin_episode(0, rng)
    out = env.step(0, a)
    agent.step(out.reward, out.next, out.terminal, rng)
    with pytest.raises(CalledMidEpisode):
        nstep_episode_finalize(agent)
    nstep_episode_finalize(agent, truncated=True)
    assert agent.buffer == []


@given(st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_greedy_action_leaves_state_unchanged(seed):
    env = Gridworld(Task.B)
    rng = RngStream(seed)
    for cls, name in ((SarsaLambda, "sarsa_lambda"), (MBVI, "mb_vi"), (MBSU, "mb_su"), (NStepModel, "nstep_model")):
        agent = cls(env.descriptor, default_config(name, GAMMA))
        s = env.reset(InitSpec.FULL_TRAIN, rng)
        a = agent.begin_episode(s, rng)
        for _ in range(20):
            out = env.step(s, a)
            a = agent.step(out.reward, out.next, out.terminal, rng)
            if a is None:
                break
            s = out.next
        before = agent.state_hash()
        for s in range(100):
            agent.greedy_action(s, rng)
        assert agent.state_hash() == before
