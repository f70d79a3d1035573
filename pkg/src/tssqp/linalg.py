"""Dense linear algebra for the SQP step.

The construction route follows one pass: an orthogonal factorization (SVD) of
J yields the null-space basis Z, the minimum-norm normal component v solving
J v = -c, the tangential component u from the reduced system
(Z' H Z) w = -Z' (g + H v), and the multiplier y as the least-squares solution
of the first KKT block.  The direct dense solve of the augmented saddle-point
matrix exists only in the test suite as an independent oracle.

All functions are pure; the column signs of Z are unspecified and callers must
be sign-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    IndefiniteReducedHessian,
    NonPositiveBeta,
    RankDeficientJacobian,
)

TOL_LIN = 1e-8


@dataclass(frozen=True)
class KktSolution:
    """Solution (p, y) of the Newton SQP system [[H, J'], [J, 0]] [p; y] = -[g; c]."""

    p: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class StepDecomposition:
    """Orthogonal split p = u + v with the composed direction d = beta * u + v."""

    u: np.ndarray
    v: np.ndarray
    beta: float
    d: np.ndarray


def _check_shapes(J: np.ndarray, n_vecs: dict[str, np.ndarray], H: np.ndarray | None = None) -> None:
    m, n = J.shape
    if m > n:
        raise DimensionMismatch(f"J is {m}x{n}; need m <= n")
    if H is not None and H.shape != (n, n):
        raise DimensionMismatch(f"H has shape {H.shape}, expected ({n}, {n})")
    for label, vec in n_vecs.items():
        if vec.shape[0] != (n if label in ("g", "grad") else m):
            raise DimensionMismatch(f"{label} has length {vec.shape[0]}")


def solve_newton_kkt(H: np.ndarray, J: np.ndarray, g: np.ndarray, c: np.ndarray) -> KktSolution:
    """Solve the Newton SQP system for the step p and multiplier y.

    Raises RankDeficientJacobian when sigma_min(J) <= max(1e-10 sigma_max, 1e-14)
    and IndefiniteReducedHessian when Z' H Z fails its Cholesky factorization.
    """
    ksol, _, _, _, _ = solve_step(H, J, g, c)
    return ksol


def solve_step(
    H: np.ndarray, J: np.ndarray, g: np.ndarray, c: np.ndarray
) -> tuple[KktSolution, np.ndarray, np.ndarray, float, float]:
    """One-pass step computation: returns (KktSolution, u, v, sigma_min, sigma_max)."""
    H = np.ascontiguousarray(H, dtype=float)
    J = np.ascontiguousarray(J, dtype=float)
    g = np.ascontiguousarray(g, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    _check_shapes(J, {"g": g, "c": c}, H)
    status, p, y, u, v, smin, smax = _kernels.sqp_step_kernel(H, J, g, c)
    if status == _kernels.RANK_DEFICIENT:
        raise RankDeficientJacobian(f"sigma_min(J) = {smin:.3e} <= rank tolerance (sigma_max = {smax:.3e})")
    if status == _kernels.INDEFINITE:
        raise IndefiniteReducedHessian("Z' H Z is not positive definite")
    return KktSolution(p=p, y=y), u, v, smin, smax


def null_space_basis(J: np.ndarray) -> np.ndarray:
    """Orthonormal basis Z of Null(J), shape (n, n - m); column signs unspecified."""
    J = np.asarray(J, dtype=float)
    m, n = J.shape
    if m > n:
        raise DimensionMismatch(f"J is {m}x{n}; need m <= n")
    _, s, Vt = np.linalg.svd(J, full_matrices=True)
    if s[m - 1] <= max(_kernels._RANK_RTOL * s[0], _kernels._RANK_FLOOR):
        raise RankDeficientJacobian(f"sigma_min(J) = {s[m - 1]:.3e} <= rank tolerance")
    return Vt[m:, :].T.copy()


def normal_component(J: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Minimum-norm v in Range(J') with J v = -c; independent of any gradient."""
    J = np.asarray(J, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = J.shape
    _check_shapes(J, {"c": c})
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    if s[m - 1] <= max(_kernels._RANK_RTOL * s[0], _kernels._RANK_FLOOR):
        raise RankDeficientJacobian(f"sigma_min(J) = {s[m - 1]:.3e} <= rank tolerance")
    return -Vt.T @ ((U.T @ c) / s)


def tangential_component(ksol: KktSolution, J: np.ndarray, c: np.ndarray) -> np.ndarray:
    """u = p - v for the minimum-norm v; lies in Null(J) when ksol is consistent."""
    return ksol.p - normal_component(J, c)


def compose_direction(u: np.ndarray, v: np.ndarray, beta: float) -> StepDecomposition:
    """d = beta * u + v, keeping all four fields."""
    if beta <= 0.0:
        raise NonPositiveBeta(f"beta must be positive, got {beta}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"u has shape {u.shape}, v has shape {v.shape}")
    return StepDecomposition(u=u, v=v, beta=float(beta), d=beta * u + v)


def least_squares_multiplier(J: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """y = argmin_y ||grad + J' y||_2 = -(J J')^{-1} J grad for full row rank J."""
    J = np.ascontiguousarray(J, dtype=float)
    grad = np.ascontiguousarray(grad, dtype=float)
    _check_shapes(J, {"grad": grad})
    status, y, smin, smax = _kernels.lstsq_multiplier_kernel(J, grad)
    if status == _kernels.RANK_DEFICIENT:
        raise RankDeficientJacobian(f"sigma_min(J) = {smin:.3e} <= rank tolerance (sigma_max = {smax:.3e})")
    return y
