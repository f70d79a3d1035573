"""Experiment orchestration: multi-problem, multi-noise, multi-seed runs.

Every run's RNG stream is derived from a SHA-256 hash of
``base_seed | problem | strategy | noise | trial``, so adding a problem or
strategy to a plan never shifts the seeds of existing runs, and execution
order (including the worker-pool size) never changes the output: rows are
sorted by key before emission.

``wall_ms`` is 0 by default so that repeated runs of the same plan are
byte-identical; set ``TSSQP_TIMING=1`` to record real timings at the cost of
that guarantee.

Quartiles in :func:`summarize` use linear interpolation between order
statistics (Hyndman-Fan type 7, numpy's default).
"""

from __future__ import annotations

import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import solver
from .diagnostics import AuditReport, audit_trace
from .errors import ConfigError, EmptyInput
from .problems import NoiseModel, Problem, load_problem
from .solver import SolverConfig, Trace

CSV_COLUMNS = ("problem", "strategy", "noise", "trial", "status",
               "feas_error", "stat_error", "iters", "wall_ms")

DEFAULT_NOISE_LEVELS = (1e-5, 1e-3, 1e-1)


@dataclass(frozen=True)
class ExperimentPlan:
    problems: tuple[str, ...]
    strategies: tuple[str, ...] = ("linesearch",)
    noise_levels: tuple[float, ...] = DEFAULT_NOISE_LEVELS
    trials: int = 20
    budget: int = 1000
    base_seed: int = 0
    eta: float = 0.1
    nu: float = 1.0
    theta: float = 1.0
    xi: float = 1e-3
    rho: float = 0.5
    q0: float = 1e-9
    b0: float = 1.0
    alpha_rule: str = "lower"
    feas_tol: float = 1e-6
    stat_tol: float = 1e-4

    def validate(self) -> None:
        if not self.problems:
            raise ConfigError("plan needs at least one problem")
        if not self.strategies:
            raise ConfigError("plan needs at least one strategy")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if any(e < 0 for e in self.noise_levels):
            raise ConfigError("noise levels must be nonnegative")
        for s in self.strategies:
            if s not in solver.STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}")

    def config_for(self, strategy: str, noise_level: float) -> SolverConfig:
        return SolverConfig(
            strategy=strategy,
            max_iters=self.budget,
            feas_tol=self.feas_tol,
            stat_tol=self.stat_tol,
            eta=self.eta, nu=self.nu, theta=self.theta,
            xi=self.xi, rho=self.rho, q0=self.q0, b0=self.b0,
            alpha_rule=self.alpha_rule,
            noise=NoiseModel(epsilon_n=noise_level, seed=self.base_seed),
        )


@dataclass(frozen=True)
class ResultRow:
    problem: str
    strategy: str
    noise: float
    trial: int
    status: str
    feas_error: float
    stat_error: float
    iters: int
    wall_ms: float
    audit: Optional[AuditReport] = None

    @property
    def key(self) -> tuple:
        return (self.problem, self.strategy, self.noise, self.trial)


def run_seed(base_seed: int, problem: str, strategy: str, noise: float, trial: int) -> int:
    """Stable 64-bit per-run seed from the run's identity (SHA-256 of a canonical string)."""
    text = f"{base_seed}|{problem}|{strategy}|{noise!r}|{trial}"
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _status_token(trace: Trace) -> str:
    if trace.status == solver.FAILED:
        return f"failed:{trace.fail_reason}"
    return trace.status


def _one_run(problem: Problem, plan: ExperimentPlan, strategy: str,
             noise_level: float, trial: int, audit: bool, timing: bool) -> ResultRow:
    config = plan.config_for(strategy, noise_level)
    seed = run_seed(plan.base_seed, problem.name, strategy, noise_level, trial)
    t0 = time.perf_counter() if timing else 0.0
    trace = solver.run(problem, config, seed=seed)
    wall_ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
    report = audit_trace(trace, problem, xi=plan.xi, rho=plan.rho) if audit else None
    return ResultRow(
        problem=problem.name,
        strategy=strategy,
        noise=noise_level,
        trial=trial,
        status=_status_token(trace),
        feas_error=trace.feas_error,
        stat_error=trace.stat_error,
        iters=trace.iterations,
        wall_ms=wall_ms,
        audit=report,
    )


def run_experiment(plan: ExperimentPlan, workers: Optional[int] = None,
                   audit: bool = False) -> list[ResultRow]:
    """One row per (problem, strategy, noise, trial), sorted by that key.

    A failed run is a row, never an omission.  `workers` > 1 executes runs in
    a thread pool; output is identical for any pool size.
    """
    plan.validate()
    problems = {name: load_problem(name) for name in plan.problems}
    timing = os.environ.get("TSSQP_TIMING", "0").lower() in ("1", "true", "yes")
    tasks = [
        (problems[name], plan, strategy, noise, trial, audit, timing)
        for name in plan.problems
        for strategy in plan.strategies
        for noise in plan.noise_levels
        for trial in range(plan.trials)
    ]
    if workers is None:
        workers = int(os.environ.get("TSSQP_WORKERS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda t: _one_run(*t), tasks))
    else:
        rows = [_one_run(*t) for t in tasks]
    rows.sort(key=lambda r: r.key)
    return rows


def to_csv(rows: Iterable[ResultRow]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(
            f"{r.problem},{r.strategy},{r.noise!r},{r.trial},{r.status},"
            f"{r.feas_error!r},{r.stat_error!r},{r.iters},{r.wall_ms!r}"
        )
    return "\n".join(lines) + "\n"


def to_json(rows: Iterable[ResultRow]) -> str:
    import json

    payload = [
        {
            "problem": r.problem, "strategy": r.strategy, "noise": r.noise,
            "trial": r.trial, "status": r.status, "feas_error": r.feas_error,
            "stat_error": r.stat_error, "iters": r.iters, "wall_ms": r.wall_ms,
        }
        for r in rows
    ]
    return json.dumps(payload, indent=2) + "\n"


def audits_to_json(rows: Iterable[ResultRow]) -> str:
    import json

    payload = [
        {
            "problem": r.problem, "strategy": r.strategy, "noise": r.noise,
            "trial": r.trial, "report": json.loads(r.audit.to_json()),
        }
        for r in rows
        if r.audit is not None
    ]
    return json.dumps(payload, indent=2) + "\n"


def _five_numbers(values: np.ndarray) -> dict[str, float]:
    q = np.percentile(values, [0, 25, 50, 75, 100], method="linear")
    return {"min": float(q[0]), "q1": float(q[1]), "median": float(q[2]),
            "q3": float(q[3]), "max": float(q[4])}


def summarize(rows: list[ResultRow], group_keys: tuple[str, ...] = ("strategy", "noise")) -> list[dict]:
    """Five-number summaries (type-7 quartiles) of both errors per group."""
    if not rows:
        raise EmptyInput("no rows to summarize")
    for key in group_keys:
        if key not in ("problem", "strategy", "noise", "trial", "status"):
            raise ConfigError(f"cannot group by {key!r}")
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault(tuple(getattr(r, k) for k in group_keys), []).append(r)
    out = []
    for gkey in sorted(groups, key=lambda t: tuple(map(str, t))):
        members = groups[gkey]
        entry: dict = dict(zip(group_keys, gkey))
        entry["count"] = len(members)
        for err in ("feas_error", "stat_error"):
            stats = _five_numbers(np.array([getattr(r, err) for r in members], dtype=float))
            entry.update({f"{err.split('_')[0]}_{k}": v for k, v in stats.items()})
        out.append(entry)
    return out
