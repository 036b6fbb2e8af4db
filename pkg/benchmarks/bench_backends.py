"""Compare the compiled (Cython) and pure-Python backends.

Two measurements:

* kernels: each hot kernel timed on both backends with identical inputs
  (a gridworld model trained for ``--steps`` MB-VI steps), checking the
  outputs agree;
* loop: one short LoCA run per tabular agent in three modes, namely the
  compiled phase loop, the Python loop on compiled kernels, and pure Python
  (``LOCA_PURE_PYTHON=1`` in a subprocess). Curves must match across modes.

Usage: python benchmarks/bench_backends.py [--steps 20000] [--repeat 5] [--skip-pure]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from loca import kernels
from loca.agents import default_config, make_agent
from loca.core import InitSpec, Task
from loca.envs import Gridworld
from loca.envs.mountaincar import V_MAX, V_MIN, X_MAX, X_MIN
from loca.harness.runner import env_factory
from loca.protocol import EvalConfig, PhaseSpec, loca_schedule, run_loca, run_phase
from loca.rng import RngStream

GAMMA = 0.97
AGENTS = ("sarsa_lambda", "q_learning", "mb_vi", "mb_su", "nstep_model")


def trained_model(steps):
    env = Gridworld(Task.A)
    agent = make_agent("mb_vi", env.descriptor, default_config("mb_vi", GAMMA))
    run_phase(agent, env, PhaseSpec(Task.A, InitSpec.FULL_TRAIN, steps), RngStream(0), compiled=False)
    return agent


def kernel_cases(steps):
    agent = trained_model(steps)
    m = agent.model
    S, A = agent.n_states, agent.n_actions
    rng = np.random.default_rng(0)
    w0 = rng.uniform(-1, 1, 3000)
    idx = np.arange(0, 1000, 100, dtype=np.intp) + 1000

    def vi(backend):
        v = np.zeros(S + 2)
        backend.value_iteration(m.succ, m.prob, m.nnz, m.rhat, v, S, A, GAMMA, 1e-6, 10_000, np.empty(S))
        return v

    def q(backend):
        out = np.empty(A)
        for s in range(S):
            backend.q_values(m.succ, m.prob, m.nnz, m.rhat, agent.v, s, A, GAMMA, out)
        return out

    def update(backend):
        succ, prob, nnz, rhat = m.succ.copy(), m.prob.copy(), m.nnz.copy(), m.rhat.copy()
        for k in range(1000):
            row = (k * 7) % (S * A)
            backend.model_update(succ, prob, nnz, rhat, row, int(succ[row, 0]), 0.0, 0.2)
        return prob

    def true_online(backend):
        w, z = w0.copy(), np.zeros(3000)
        for _ in range(1000):
            backend.true_online_update(w, z, idx, 0.05, 0.99 * 0.9, 0.1, 0.3, 0.2)
        return w

    def tiles(backend):
        out = np.empty(10, dtype=np.intp)
        for k in range(1000):
            x = X_MIN + (X_MAX - X_MIN) * k / 1000
            backend.tile_indices(x, 0.01, X_MIN, X_MAX, V_MIN, V_MAX, 10, 10, out)
        return out

    return {
        "value_iteration (to 1e-6)": vi,
        f"q_values x {S} states": q,
        "model_update x 1000": update,
        "true_online_update x 1000": true_online,
        "tile_indices x 1000": tiles,
    }


def bench_kernels(steps, repeat):
    py, cy = kernels.python_backend, kernels.compiled_backend
    print(f"kernels (MB-VI model after {steps} steps; best of {repeat})")
    print(f"  {'kernel':32s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}  agree")
    for name, fn in kernel_cases(steps).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=repeat)) * 1e3
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=repeat)) * 1e3
        agree = np.allclose(fn(py), fn(cy), rtol=0, atol=1e-12)
        print(f"  {name:32s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:7.1f}x  {agree}")


def one_run(name, steps, compiled):
    rng = RngStream(0)
    envs = env_factory("gridworld", 1, rng.substream("state-noise"))
    desc = envs(Task.A).descriptor
    make = lambda: make_agent(name, desc, default_config(name, GAMMA))  # noqa: E731
    schedule = loca_schedule(steps, steps // 5, steps, 100)
    start = time.perf_counter()
    curve = run_loca(make, envs, schedule, EvalConfig(100, 10, 40), rng, compiled=compiled)
    return time.perf_counter() - start, [[p.step, p.fraction] for p in curve.points]


def pure_python_runs(steps):
    env = dict(os.environ, LOCA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, __file__, "--worker", "--steps", str(steps)],
                         env=env, check=True, capture_output=True, text=True).stdout
    return json.loads(out)


def bench_loop(steps, skip_pure):
    print(f"\nLoCA run per agent (phases {steps}/{steps // 5}/{steps}, seconds)")
    pure = {} if skip_pure else pure_python_runs(steps)
    print(f"  {'agent':14s} {'pure python':>12s} {'py loop':>9s} {'cy loop':>9s} {'speedup':>8s}  same curves")
    for name in AGENTS:
        t_loop, c_loop = one_run(name, steps, compiled=False)
        t_cy, c_cy = one_run(name, steps, compiled=True)
        t_pure, c_pure = pure.get(name, (float("nan"), c_cy))
        same = c_loop == c_cy == c_pure
        base = t_pure if pure else t_loop
        print(f"  {name:14s} {t_pure:12.2f} {t_loop:9.2f} {t_cy:9.2f} {base / t_cy:7.1f}x  {same}")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=20_000, help="phase 1 and 3 length for the loop benchmark")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--skip-pure", action="store_true", help="skip the pure-Python subprocess")
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    if args.worker:
        json.dump({n: one_run(n, args.steps, compiled=False) for n in AGENTS}, sys.stdout)
        return
    if kernels.compiled_backend is None:
        sys.exit("compiled extension not built: run `python setup.py build_ext --inplace`")
    bench_kernels(args.steps, args.repeat)
    bench_loop(args.steps, args.skip_pure)


if __name__ == "__main__":
    main()
