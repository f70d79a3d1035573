"""Iteration loops for the two-stepsize SQP method.

One `step` performs: sample a stochastic gradient, solve the Newton KKT
system, split the step into tangential and normal components, pick the
tangential stepsize beta and the global stepsize alpha according to the
configured strategy, and move.  `run` drives steps until the iterate is both
sufficiently feasible and stationary, the budget runs out, or the step
computation fails.

Strategies
----------
fixed       beta = eta / sqrt(max_iters), alpha at an endpoint of
            [nu, nu + theta beta] (alpha_rule lower/upper), or found by the
            safeguarded backtracking search over that interval with constant
            beta = eta (alpha_rule backtrack).
adaptive    Adagrad-Norm accumulators; beta = eta / b_k, alpha at an endpoint
            of [nu/q_k, nu/q_k + min(theta/b_k, theta/q_k)].
linesearch  constant beta = eta; alpha from the safeguarded backtracking
            search over [nu/q_hat, nu/q_hat + theta beta] where
            q_hat^2 = q^2 + ||c||_1 advances every iteration.
ablation    same stepsize machinery as linesearch, but the whole step p is
            scaled by beta (d = beta p), standing in for single-stepsize
            stochastic SQP.

Stationarity is always measured with the true gradient and the least-squares
multiplier, never with the stochastic gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    EvaluationFailure,
    IndefiniteReducedHessian,
    RankDeficientJacobian,
)
from .linalg import StepDecomposition, compose_direction, least_squares_multiplier, solve_step
from .problems import Evaluation, NoiseModel, Problem, evaluate, standard_normal_vector
from .stepsize import (
    AdaptiveState,
    FixedSchedule,
    adaptive_update,
    fixed_alpha_range,
    fixed_beta,
    safeguarded_backtrack,
)

STRATEGIES = ("fixed", "adaptive", "linesearch", "ablation")

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
FAILED = "failed"

_FAIL_TOKENS = {
    RankDeficientJacobian: "rank_deficient_jacobian",
    IndefiniteReducedHessian: "indefinite_reduced_hessian",
    EvaluationFailure: "evaluation_failure",
}


@dataclass(frozen=True)
class SolverConfig:
    strategy: str = "linesearch"
    max_iters: int = 1000
    feas_tol: float = 1e-6
    stat_tol: float = 1e-4
    eta: float = 0.1
    nu: float = 1.0
    theta: float = 1.0
    xi: float = 1e-3
    rho: float = 0.5
    q0: float = 1e-9
    b0: float = 1.0
    alpha_rule: str = "lower"
    h_policy: str = "problem"
    noise: NoiseModel = field(default_factory=NoiseModel)
    stat_every: int = 1

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        if self.feas_tol <= 0 or self.stat_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.eta <= 0 or self.nu <= 0 or self.theta < 0:
            raise ConfigError("need eta > 0, nu > 0, theta >= 0")
        if not (0 < self.xi < 1) or not (0 < self.rho < 1):
            raise ConfigError("need xi, rho in (0, 1)")
        if self.q0 <= 0 or self.b0 <= 0:
            raise ConfigError("need q0, b0 > 0")
        if self.alpha_rule not in ("lower", "upper", "backtrack"):
            raise ConfigError(f"unknown alpha_rule {self.alpha_rule!r}")
        if self.strategy == "adaptive" and self.alpha_rule == "backtrack":
            raise ConfigError("the adaptive strategy takes range endpoints only (alpha_rule lower/upper)")
        if self.h_policy not in ("problem", "identity"):
            raise ConfigError(f"unknown h_policy {self.h_policy!r}")
        if self.stat_every < 1:
            raise ConfigError("stat_every must be >= 1")


@dataclass
class SolverState:
    k: int
    x: np.ndarray
    stream: np.random.Generator
    schedule: Optional[FixedSchedule] = None
    adaptive: Optional[AdaptiveState] = None
    q: float = 0.0
    last_decomposition: Optional[StepDecomposition] = None
    best_feas: float = math.inf
    best_x: Optional[np.ndarray] = None


@dataclass(frozen=True)
class IterationRecord:
    """Per-iteration instrumentation, all quantities at the pre-step iterate x.

    `d` is the direction actually taken: beta * u + v, or beta * p for the
    ablation strategy.
    """

    k: int
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    y: np.ndarray
    alpha: float
    beta: float
    alpha_lo: float
    alpha_hi: float
    n_backtracks: int
    hit_safeguard: bool
    c_l1: float
    c_l2: float
    c_inf: float
    stat_inf: float
    sigma_min: float

    @property
    def u_norm(self) -> float:
        return float(np.linalg.norm(self.u))

    @property
    def v_norm(self) -> float:
        return float(np.linalg.norm(self.v))


@dataclass(frozen=True)
class Trace:
    problem: str
    strategy: str
    status: str
    fail_reason: Optional[str]
    records: list[IterationRecord]
    iterations: int
    feas_error: float
    stat_error: float
    x_final: np.ndarray
    epsilon_n: float
    h_matrix: np.ndarray
    seed: int


def _h_matrix(problem: Problem, config: SolverConfig) -> np.ndarray:
    if config.h_policy == "problem" and problem.h_matrix is not None:
        return np.asarray(problem.h_matrix, dtype=float)
    return np.eye(problem.n)


def init_state(problem: Problem, config: SolverConfig, seed: int = 0, x0=None) -> SolverState:
    config.validate()
    x = np.asarray(problem.x0 if x0 is None else x0, dtype=float).copy()
    stream = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((config.noise.seed, int(seed))))
    )
    state = SolverState(k=0, x=x, stream=stream)
    if config.strategy == "fixed":
        state.schedule = FixedSchedule(
            nu=config.nu, theta=config.theta, eta=config.eta,
            horizon=max(config.max_iters, 1), alpha_rule=config.alpha_rule,
        )
    elif config.strategy == "adaptive":
        state.adaptive = AdaptiveState(
            eta=config.eta, nu=config.nu, theta=config.theta, b=config.b0, q=config.q0
        )
    else:
        state.q = config.q0
    return state


def _noisy_gradient(grad: np.ndarray, noise: NoiseModel, stream: np.random.Generator) -> np.ndarray:
    if noise.epsilon_n == 0.0:
        return grad.copy()
    return grad + math.sqrt(noise.epsilon_n) * standard_normal_vector(stream, grad.shape[0])


def _stationarity(J: np.ndarray, grad: np.ndarray) -> tuple[float, np.ndarray]:
    y = least_squares_multiplier(J, grad)
    return float(np.abs(grad + J.T @ y).max()), y


def step(
    state: SolverState,
    problem: Problem,
    config: SolverConfig,
    evaluation: Optional[Evaluation] = None,
    stat_inf: Optional[float] = None,
) -> tuple[SolverState, IterationRecord]:
    """Advance one iteration; returns the mutated state and its record.

    `evaluation`/`stat_inf` let `run` share work already done for the
    termination check; when omitted they are computed here.
    """
    ev = evaluation if evaluation is not None else evaluate(problem, state.x)
    H = _h_matrix(problem, config)
    x = state.x
    c_l1 = float(np.abs(ev.c).sum())
    if stat_inf is None:
        stat_inf, _ = _stationarity(ev.jac, ev.grad)

    g = _noisy_gradient(ev.grad, config.noise, state.stream)
    ksol, u, v, sigma_min, _ = solve_step(H, ev.jac, g, ev.c)

    def c_oracle(z: np.ndarray) -> np.ndarray:
        return evaluate(problem, z).c

    n_backtracks = 0
    hit_safeguard = False
    if config.strategy == "fixed":
        beta = fixed_beta(state.schedule)
        lo, hi = fixed_alpha_range(state.schedule, beta)
        decomp = compose_direction(u, v, beta)
        direction = decomp.d
        if state.schedule.alpha_rule == "lower":
            alpha = lo
        elif state.schedule.alpha_rule == "upper":
            alpha = hi
        else:
            alpha, hit_safeguard, n_backtracks = safeguarded_backtrack(
                c_oracle, x, direction, hi, lo, config.xi, config.rho
            )
    elif config.strategy == "adaptive":
        beta, (lo, hi) = adaptive_update(state.adaptive, float(u @ u), c_l1)
        decomp = compose_direction(u, v, beta)
        direction = decomp.d
        alpha = lo if config.alpha_rule == "lower" else hi
    else:  # linesearch or ablation
        beta = config.eta
        q_hat = math.sqrt(state.q * state.q + c_l1)
        lo = config.nu / q_hat
        hi = lo + config.theta * beta
        decomp = compose_direction(u, v, beta)
        direction = decomp.d if config.strategy == "linesearch" else beta * ksol.p
        alpha, hit_safeguard, n_backtracks = safeguarded_backtrack(
            c_oracle, x, direction, hi, lo, config.xi, config.rho
        )
        state.q = q_hat

    record = IterationRecord(
        k=state.k, x=x.copy(), u=u, v=v, d=direction, y=ksol.y,
        alpha=float(alpha), beta=float(beta), alpha_lo=float(lo), alpha_hi=float(hi),
        n_backtracks=n_backtracks, hit_safeguard=hit_safeguard,
        c_l1=c_l1, c_l2=float(np.linalg.norm(ev.c)), c_inf=float(np.abs(ev.c).max()),
        stat_inf=float(stat_inf), sigma_min=float(sigma_min),
    )
    state.x = x + alpha * direction
    state.k += 1
    state.last_decomposition = decomp
    return state, record


def run(problem: Problem, config: SolverConfig, seed: int = 0, x0=None) -> Trace:
    """Iterate until converged, out of budget, or failed.

    Reported errors follow the experiment protocol: the measures at the first
    sufficiently feasible iterate when one exists, otherwise at the least
    infeasible iterate visited (terminal point included).
    """
    config.validate()
    state = init_state(problem, config, seed=seed, x0=x0)
    records: list[IterationRecord] = []
    status = BUDGET_EXHAUSTED
    fail_reason = None
    first_feasible: Optional[tuple[float, float]] = None
    least_infeasible: tuple[float, tuple[float, float]] = (math.inf, (math.nan, math.nan))

    def observe(k: int) -> tuple[float, float, Evaluation]:
        """Measures at the current iterate; returns (feas_inf, stat_inf, evaluation)."""
        nonlocal first_feasible, least_infeasible
        ev = evaluate(problem, state.x)
        feas = float(np.abs(ev.c).max())
        want_stat = (k % config.stat_every == 0) or (feas <= config.feas_tol)
        stat = _stationarity(ev.jac, ev.grad)[0] if want_stat else math.nan
        if feas <= config.feas_tol and first_feasible is None:
            first_feasible = (feas, stat)
        if feas < least_infeasible[0]:
            least_infeasible = (feas, (feas, stat))
        if feas < state.best_feas:
            state.best_feas = feas
            state.best_x = state.x.copy()
        return feas, stat, ev

    try:
        converged = False
        for k in range(config.max_iters):
            feas, stat, ev = observe(k)
            if feas <= config.feas_tol and stat <= config.stat_tol:
                converged = True
                break
            state, rec = step(state, problem, config, evaluation=ev, stat_inf=stat)
            records.append(rec)
        else:
            observe(config.max_iters)
        if converged:
            status = CONVERGED
    except (RankDeficientJacobian, IndefiniteReducedHessian, EvaluationFailure) as exc:
        status = FAILED
        fail_reason = _FAIL_TOKENS[type(exc)]

    if first_feasible is not None:
        feas_error, stat_error = first_feasible
    else:
        feas_error, stat_error = least_infeasible[1]
    return Trace(
        problem=problem.name,
        strategy=config.strategy,
        status=status,
        fail_reason=fail_reason,
        records=records,
        iterations=len(records),
        feas_error=feas_error,
        stat_error=stat_error,
        x_final=state.x.copy(),
        epsilon_n=config.noise.epsilon_n,
        h_matrix=_h_matrix(problem, config),
        seed=int(seed),
    )


def run_ablation(problem: Problem, config: SolverConfig, seed: int = 0, x0=None) -> Trace:
    """Single-stepsize baseline: identical pipeline with d = beta * p."""
    if config.strategy != "ablation":
        config = replace(config, strategy="ablation")
    return run(problem, config, seed=seed, x0=x0)
