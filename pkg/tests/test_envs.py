import math

import pytest

from loca.core import InitSpec, InvalidAction, SteppedTerminal, Task, TerminalTag, UnsupportedInit
from loca.envs import SHUFFLED_PERMUTATIONS, Gridworld, MountainCar, make_env, mc_dynamics, mc_t2_contains
from loca.envs.mountaincar import NOOP, PUSH_LEFT, PUSH_RIGHT, X_MAX
from loca.rng import RngStream

import oracles


# -- gridworld ---------------------------------------------------------------

@pytest.mark.parametrize("task,r1", [(Task.A, 4.0), (Task.B, 1.0)])
def test_gridworld_matches_reference_dynamics(task, r1):
    env = Gridworld(task)
    for s in range(100):
        for a in range(4):
            out = env.step(s, a)
            nxt, r = oracles.grid_step(s, a, r1)
            assert (out.next, out.reward) == (nxt, r)
            assert (out.terminal is not None) == (nxt >= 100)


def test_gridworld_one_way_passage_bfs():
    env = Gridworld()
    col24 = {env.cell(24, y) for y in range(4)}
    for s in col24:
        assert oracles.reachable(s) == col24 | {oracles.T1}
    for s in range(100):
        if s not in col24:
            assert {oracles.T1, oracles.T2} <= oracles.reachable(s)


def test_gridworld_resets():
    env = Gridworld()
    rng = RngStream(0)
    assert all(env.coords(env.reset(InitSpec.LOCAL_T1, rng))[0] == 24 for _ in range(100))
    assert all(env.coords(env.reset(InitSpec.EVAL_MID, rng))[0] == 12 for _ in range(100))
    seen = {env.reset(InitSpec.FULL_TRAIN, rng) for _ in range(5000)}
    assert seen == set(range(100))


def test_gridworld_tables_consistent():
    env = Gridworld(Task.B)
    t = env.transition_tables()
    for s in range(100):
        for a in range(4):
            out = env.step(s, a)
            assert t.next[s, a] == out.next and t.reward[s, a] == out.reward
    assert sorted(t.starts[InitSpec.EVAL_MID]) == [env.cell(12, y) for y in range(4)]


def test_gridworld_errors():
    env = Gridworld()
    with pytest.raises(InvalidAction):
        env.step(0, 4)
    with pytest.raises(SteppedTerminal):
        env.step(100 + TerminalTag.T1, 0)
    with pytest.raises(ValueError):
        Gridworld(Task.SHUFFLED_A)


def test_make_env():
    assert make_env("gridworld", "B").reward_t1 == 1.0
    shuffled = make_env("mountaincar", Task.SHUFFLED_A)
    assert shuffled.perm == SHUFFLED_PERMUTATIONS["mountaincar"] == (NOOP, PUSH_RIGHT, PUSH_LEFT)
    with pytest.raises(ValueError):
        make_env("cartpole", "A")


# -- mountain car ------------------------------------------------------------

def test_mc_dynamics_against_classic_formula():
    rng = RngStream(5)
    for _ in range(2000):
        x, v = rng.uniform(-1.2, 0.5), rng.uniform(-0.07, 0.07)
        a = rng.integers(3)
        assert mc_dynamics(x, v, a) == pytest.approx(oracles.mc_step_classic(x, v, a), abs=1e-15)


def test_mc_left_wall_resets_velocity():
    assert mc_dynamics(-1.19, -0.05, PUSH_LEFT) == (-1.2, 0.0)


def test_mc_t2_membership():
    assert mc_t2_contains(-0.52, 0.0)
    assert mc_t2_contains(-0.52 + 0.069, 0.0)
    assert not mc_t2_contains(-0.52 + 0.071, 0.0)
    assert not mc_t2_contains(-0.52, 0.0071)
    assert not mc_t2_contains(0.52, 0.0)


def test_mc_rewards_and_terminals():
    a, b = MountainCar(Task.A), MountainCar(Task.B)
    s = (0.49, 0.05)
    assert a.step(s, NOOP).terminal == TerminalTag.T1 and a.step(s, NOOP).reward == 4.0
    assert b.step(s, NOOP).reward == 1.0
    assert not b.is_absorbing((-0.45, 0.0))
    out = b.step((-0.45, 0.0), NOOP)
    assert out.terminal == TerminalTag.T2 and out.reward == 2.0
    with pytest.raises(SteppedTerminal):
        b.step((-0.52, 0.0), NOOP)
    with pytest.raises(InvalidAction):
        b.step((0.0, 0.0), 3)


def test_mc_forced_zone_pushes_right():
    env = MountainCar(Task.B)
    s = (0.42, 0.0)
    assert env.step(s, PUSH_LEFT) == env.step(s, PUSH_RIGHT)


def test_mc_forced_zone_sweep_never_hits_t2():
    env = MountainCar(Task.B)
    rng = RngStream(11)
    hits = {TerminalTag.T1: 0, TerminalTag.T2: 0}
    for _ in range(10_000):
        s = env.reset(InitSpec.LOCAL_T1, rng)
        while True:
            out = env.step(s, rng.integers(3))
            if out.terminal is not None:
                hits[out.terminal] += 1
                break
            assert out.next[0] > 0.4
            s = out.next
    assert hits[TerminalTag.T2] == 0 and hits[TerminalTag.T1] == 10_000


def test_mc_full_train_mixture():
    env = MountainCar()
    rng = RngStream(2)
    n, in_box = 100_000, 0
    for _ in range(n):
        x, v = env.reset(InitSpec.FULL_TRAIN, rng)
        assert -1.2 <= x <= 0.5 and -0.07 <= v <= 0.07
        assert not env.is_absorbing((x, v))
        in_box += -1.0 <= x <= 0.0 and -0.03 <= v <= 0.03
    # Box share: p * (box area / full area) + (1 - p), minus the redrawn T2 starts.
    box_area = (1.0 * 0.06) / (1.7 * 0.14)
    t2_area = math.pi * 0.07 * 0.007
    accept = 1 - (0.5 * t2_area / (1.7 * 0.14) + 0.5 * t2_area / 0.06)
    expected = (0.5 * box_area + 0.5 - 0.5 * t2_area / (1.7 * 0.14) - 0.5 * t2_area / 0.06) / accept
    assert in_box / n == pytest.approx(expected, abs=0.01)


def test_mc_resets():
    env = MountainCar()
    rng = RngStream(0)
    for _ in range(1000):
        x, v = env.reset(InitSpec.EVAL_MID, rng)
        assert -0.2 <= x <= -0.15 and -0.005 <= v <= 0.005
        x, v = env.reset(InitSpec.LOCAL_T1, rng)
        assert 0.4 <= x <= X_MAX and 0.0 <= v <= 0.07
    assert MountainCar().transition_tables() is None
    with pytest.raises(UnsupportedInit):
        env.reset("nowhere", rng)
