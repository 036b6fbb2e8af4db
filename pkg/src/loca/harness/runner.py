"""Seeded multi-run execution of an experiment suite."""

from __future__ import annotations

import logging
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from dataclasses import dataclass
from typing import Callable, Optional

from loca.agents import make_agent
from loca.core import Env, InitSpec, LocaError, StateMultiplier, Task
from loca.envs import make_env
from loca.harness.config import ExperimentConfig, MethodSpec
from loca.protocol import (
    EvalConfig,
    EvalCurve,
    PhaseSpec,
    loca_schedule,
    regret,
    run_default,
    run_loca,
)
from loca.rng import RngStream

log = logging.getLogger(__name__)


class SuiteError(LocaError):
    """A run failed; ``completed`` lists the (method, run) pairs that had finished."""

    def __init__(self, message: str, completed: list[tuple[str, int]]):
        super().__init__(message)
        self.completed = completed


@dataclass(frozen=True)
class RunRecord:
    method: str
    run_index: int
    seed: int
    curve_loca: EvalCurve
    curve_default: EvalCurve
    loca_regret: float
    default_regret: float


def env_factory(name: str, s_mult: int, noise: Optional[RngStream]) -> Callable[[Task], Env]:
    """Factory for one run; all environments it makes share one multiplier noise stream."""

    def make(task: Task) -> Env:
        env = make_env(name, task)
        return env if s_mult == 1 else StateMultiplier(env, s_mult, noise)

    return make


def _setup(cfg: ExperimentConfig, method: MethodSpec):
    sch = cfg.schedule
    phases = loca_schedule(sch.phase1_for(method), sch.phase2, sch.phase3, sch.episode_cap, sch.epsilon,
                           sch.phase1_epsilon)
    agent_cfg = method.agent_config(cfg.gamma)

    def factories(stream: RngStream):
        envs = env_factory(cfg.environment, method.s_mult, stream.substream("state-noise"))
        descriptor = envs(Task.A).descriptor
        return envs, (lambda: make_agent(method.agent, descriptor, agent_cfg))

    return phases, EvalConfig(cfg.eval.delta_train, cfg.eval.episodes, cfg.eval.deadline), factories


def loca_curve(cfg: ExperimentConfig, method: MethodSpec, run_index: int) -> EvalCurve:
    """Phase-3 curve after LoCA pretraining for run ``run_index`` (seed ``cfg.seed + run_index``)."""
    phases, eval_cfg, factories = _setup(cfg, method)
    rng = RngStream(cfg.seed + run_index).substream("loca")
    envs, agents = factories(rng)
    return run_loca(agents, envs, phases, eval_cfg, rng)


def default_curve(cfg: ExperimentConfig, method: MethodSpec, run_index: int) -> EvalCurve:
    """Phase-3 curve without LoCA pretraining (fresh, or after shuffled-action pretraining)."""
    phases, eval_cfg, factories = _setup(cfg, method)
    rng = RngStream(cfg.seed + run_index).substream("default")
    envs, agents = factories(rng)
    pretrain = None
    if cfg.default_mode == "shuffled_pretrain":
        p1 = phases[0]
        pretrain = PhaseSpec(Task.SHUFFLED_A, InitSpec.FULL_TRAIN, p1.steps, True, p1.episode_cap,
                             p1.epsilon, p1.epsilon_final)
    return run_default(agents, envs, phases[2], eval_cfg, rng, pretrain=pretrain)


def run_one(cfg: ExperimentConfig, method: MethodSpec, run_index: int) -> RunRecord:
    curve_loca = loca_curve(cfg, method, run_index)
    curve_default = default_curve(cfg, method, run_index)
    delta = cfg.eval.delta_train
    return RunRecord(
        method=method.id, run_index=run_index, seed=cfg.seed + run_index,
        curve_loca=curve_loca, curve_default=curve_default,
        loca_regret=regret(curve_loca, delta), default_regret=regret(curve_default, delta),
    )


def _task(args) -> RunRecord:
    cfg, method_pos, run_index = args
    return run_one(cfg, cfg.methods[method_pos], run_index)


def run_suite(cfg: ExperimentConfig, workers: Optional[int] = None) -> list[RunRecord]:
    """All (method, run) pairs of ``cfg``, ordered by method then run index.

    ``workers`` (default ``cfg.workers``) bounds the process pool; 1 runs
    everything in this process. The first failing run aborts the suite.
    """
    workers = cfg.workers if workers is None else workers
    tasks = [(cfg, m, r) for m in range(len(cfg.methods)) for r in range(cfg.runs)]
    done: dict[tuple[int, int], RunRecord] = {}

    def completed() -> list[tuple[str, int]]:
        return [(cfg.methods[m].id, r) for m, r in sorted(done)]

    if workers <= 1:
        for t in tasks:
            try:
                rec = _task(t)
            except Exception as e:
                raise SuiteError(f"{cfg.methods[t[1]].id} run {t[2]} failed: {e!r}", completed()) from e
            done[(t[1], t[2])] = rec
            log.info("%s run %d: loca %.0f default %.0f", rec.method, rec.run_index,
                     rec.loca_regret, rec.default_regret)
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            futures = {pool.submit(_task, t): t for t in tasks}
            pending = set(futures)
            while pending:
                finished, pending = wait(pending, return_when=FIRST_EXCEPTION)
                failed = [f for f in finished if f.exception() is not None]
                for fut in finished:
                    if fut.exception() is None:
                        t = futures[fut]
                        done[(t[1], t[2])] = fut.result()
                if failed:
                    for p in pending:
                        p.cancel()
                    t, err = futures[failed[0]], failed[0].exception()
                    raise SuiteError(f"{cfg.methods[t[1]].id} run {t[2]} failed: {err!r}", completed()) from err
    return [done[k] for k in sorted(done)]
