"""Dense step kernels: KKT solve + orthogonal decomposition, least-squares multiplier.

Two interchangeable backends compute the same quantities:

* a vectorized numpy implementation (always available), and
* numba ``@njit`` twins of the same math (hand-rolled Cholesky instead of
  exceptions, since the jitted code signals failure through a status code).

The backend is chosen once at import time: numba is used when importable
unless the environment variable ``TSSQP_NUMBA`` is set to ``0``/``false``/
``no``.  ``benchmarks/kernel_bench.py`` times both paths.

Status codes returned by the kernels::

    0  success
    1  rank-deficient Jacobian (sigma_min <= max(1e-10 * sigma_max, 1e-14))
    2  reduced Hessian Z' H Z not positive definite
"""

from __future__ import annotations

import os

import numpy as np

OK = 0
RANK_DEFICIENT = 1
INDEFINITE = 2

_RANK_RTOL = 1e-10
_RANK_FLOOR = 1e-14


def _sqp_step_numpy(H, J, g, c):
    """Solve the Newton KKT system via SVD of J and a reduced solve.

    Returns (status, p, y, u, v, sigma_min, sigma_max) where p = u + v,
    u in Null(J) and v the minimum-norm solution of J v = -c in Range(J').
    """
    m, n = J.shape
    U, s, Vt = np.linalg.svd(J, full_matrices=True)
    smax = s[0]
    smin = s[m - 1]
    zero = np.zeros(0)
    if smin <= max(_RANK_RTOL * smax, _RANK_FLOOR):
        return RANK_DEFICIENT, zero, zero, zero, zero, smin, smax
    Vr = Vt[:m, :].T
    v = -Vr @ ((U.T @ c) / s)
    if m < n:
        Z = Vt[m:, :].T
        Ared = Z.T @ H @ Z
        try:
            np.linalg.cholesky(Ared)
        except np.linalg.LinAlgError:
            return INDEFINITE, zero, zero, zero, zero, smin, smax
        w = np.linalg.solve(Ared, -(Z.T @ (g + H @ v)))
        u = Z @ w
    else:
        u = np.zeros(n)
    p = u + v
    y = -U @ ((Vr.T @ (g + H @ p)) / s)
    return OK, p, y, u, v, smin, smax


def _lstsq_multiplier_numpy(J, grad):
    """y = argmin_y ||grad + J' y||_2 for full row rank J.

    Returns (status, y, sigma_min, sigma_max).
    """
    m = J.shape[0]
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    smax = s[0]
    smin = s[m - 1]
    if smin <= max(_RANK_RTOL * smax, _RANK_FLOOR):
        return RANK_DEFICIENT, np.zeros(0), smin, smax
    return OK, -U @ ((Vt @ grad) / s), smin, smax


def _sqp_step_jit_src(H, J, g, c):
    # numba-compatible twin of _sqp_step_numpy; Cholesky is hand-rolled so the
    # non-PD case is a status code rather than an exception.
    m, n = J.shape
    U, s, Vt = np.linalg.svd(J, full_matrices=True)
    smax = s[0]
    smin = s[m - 1]
    zero = np.zeros(0)
    if smin <= max(_RANK_RTOL * smax, _RANK_FLOOR):
        return RANK_DEFICIENT, zero, zero, zero, zero, smin, smax
    Vr = Vt[:m, :].T.copy()
    v = -Vr @ ((U.T @ c) / s)
    u = np.zeros(n)
    if m < n:
        Z = Vt[m:, :].T.copy()
        Ared = Z.T @ H @ Z
        k = n - m
        L = np.zeros((k, k))
        ok = True
        for j in range(k):
            acc = Ared[j, j]
            for t in range(j):
                acc -= L[j, t] * L[j, t]
            if acc <= 0.0:
                ok = False
                break
            L[j, j] = np.sqrt(acc)
            for i in range(j + 1, k):
                acc2 = Ared[i, j]
                for t in range(j):
                    acc2 -= L[i, t] * L[j, t]
                L[i, j] = acc2 / L[j, j]
        if not ok:
            return INDEFINITE, zero, zero, zero, zero, smin, smax
        rhs = -(Z.T @ (g + H @ v))
        w = np.zeros(k)
        for i in range(k):
            acc = rhs[i]
            for t in range(i):
                acc -= L[i, t] * w[t]
            w[i] = acc / L[i, i]
        for i in range(k - 1, -1, -1):
            acc = w[i]
            for t in range(i + 1, k):
                acc -= L[t, i] * w[t]
            w[i] = acc / L[i, i]
        u = Z @ w
    p = u + v
    y = -U @ ((Vr.T @ (g + H @ p)) / s)
    return OK, p, y, u, v, smin, smax


def _lstsq_multiplier_jit_src(J, grad):
    m = J.shape[0]
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    smax = s[0]
    smin = s[m - 1]
    if smin <= max(_RANK_RTOL * smax, _RANK_FLOOR):
        return RANK_DEFICIENT, np.zeros(0), smin, smax
    return OK, -U @ ((Vt @ grad) / s), smin, smax


def _select_backend():
    if os.environ.get("TSSQP_NUMBA", "1").lower() in ("0", "false", "no"):
        return "numpy", _sqp_step_numpy, _lstsq_multiplier_numpy, None, None
    try:
        from numba import njit
    except ImportError:
        return "numpy", _sqp_step_numpy, _lstsq_multiplier_numpy, None, None
    step_jit = njit(cache=True)(_sqp_step_jit_src)
    lstsq_jit = njit(cache=True)(_lstsq_multiplier_jit_src)
    return "numba", step_jit, lstsq_jit, step_jit, lstsq_jit


_BACKEND, sqp_step_kernel, lstsq_multiplier_kernel, sqp_step_numba, lstsq_multiplier_numba = _select_backend()
sqp_step_numpy = _sqp_step_numpy
lstsq_multiplier_numpy = _lstsq_multiplier_numpy


def backend_name() -> str:
    return _BACKEND
