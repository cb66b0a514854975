"""Linear solvers, quadrature and the three-point smoothing filter.

Dense systems come from the Newton Jacobians of the profile problem;
cyclic banded systems come from the periodic implicit time step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import SingularMatrixError

__all__ = [
    "DenseSystem",
    "CyclicBandedSystem",
    "PIVOT_RTOL",
    "lu_factor",
    "lu_solve",
    "solve_dense",
    "solve_cyclic_banded",
    "low_pass_filter",
    "trapezoid_integral",
]

PIVOT_RTOL = 1e-14


@dataclass
class DenseSystem:
    """Square system ``matrix @ x = rhs``."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix must be square, got {self.matrix.shape}")
        if self.rhs.shape[0] != n:
            raise ValueError("rhs length does not match matrix")
        if not (np.all(np.isfinite(self.matrix)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("system has non-finite entries")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass
class CyclicBandedSystem:
    """Periodic band matrix with half-bandwidth ``k``.

    ``diagonals[k + d, i]`` holds ``A[i, (i + d) % n]`` for ``d`` in
    ``-k..k``, so every row stores its own stencil and the band wraps
    around the corners.
    """

    diagonals: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.diagonals = np.asarray(self.diagonals, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        nd, n = self.diagonals.shape
        if nd % 2 != 1:
            raise ValueError("need an odd number of diagonals")
        if n <= nd - 1:
            raise ValueError(f"n={n} too small for half-bandwidth {nd // 2}")
        if self.rhs.shape[0] != n:
            raise ValueError("rhs length does not match matrix")

    @property
    def n(self) -> int:
        return self.diagonals.shape[1]

    @property
    def half_bandwidth(self) -> int:
        return self.diagonals.shape[0] // 2

    def densify(self) -> np.ndarray:
        n, k = self.n, self.half_bandwidth
        A = np.zeros((n, n))
        rows = np.arange(n)
        for d in range(-k, k + 1):
            A[rows, (rows + d) % n] += self.diagonals[k + d]
        return A

    def matvec(self, x: np.ndarray) -> np.ndarray:
        k = self.half_bandwidth
        out = np.zeros_like(x, dtype=float)
        for d in range(-k, k + 1):
            out += self.diagonals[k + d] * np.roll(x, -d, axis=0)
        return out


def lu_factor(A: np.ndarray, scale: float | None = None):
    """LU factorization with partial pivoting.

    Returns ``(LU, perm)`` with ``A[perm] = L @ U``. Raises
    :class:`SingularMatrixError` when a pivot drops below
    ``PIVOT_RTOL * scale`` (``scale`` defaults to ``max |A_ij|``).
    """
    LU = np.array(A, dtype=float, copy=True)
    n = LU.shape[0]
    perm = np.arange(n)
    if scale is None:
        scale = float(np.max(np.abs(LU))) if n else 0.0
    tiny = PIVOT_RTOL * scale
    for j in range(n):
        p = j + int(np.argmax(np.abs(LU[j:, j])))
        if abs(LU[p, j]) <= tiny:
            raise SingularMatrixError(
                f"pivot {abs(LU[p, j]):.3e} at column {j} below {tiny:.3e}"
            )
        if p != j:
            LU[[j, p]] = LU[[p, j]]
            perm[[j, p]] = perm[[p, j]]
        LU[j + 1 :, j] /= LU[j, j]
        LU[j + 1 :, j + 1 :] -= np.outer(LU[j + 1 :, j], LU[j, j + 1 :])
    return LU, perm


def lu_solve(factors, b: np.ndarray) -> np.ndarray:
    LU, perm = factors
    y = np.array(b, dtype=float)[perm]
    n = LU.shape[0]
    for i in range(1, n):
        y[i] -= LU[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - LU[i, i + 1 :] @ y[i + 1 :]) / LU[i, i]
    return y


def solve_dense(system: DenseSystem) -> np.ndarray:
    """Solve a dense square system by pivoted LU."""
    return lu_solve(lu_factor(system.matrix), system.rhs)


def _corner_factors(system: CyclicBandedSystem):
    # A = B + U @ Vt with B the non-wrapping band and U selecting the
    # first and last k rows, whose wrapped entries live in Vt.
    n, k = system.n, system.half_bandwidth
    rows = np.concatenate([np.arange(k), np.arange(n - k, n)])
    Vt = np.zeros((2 * k, n))
    for r, i in enumerate(rows):
        for d in range(-k, k + 1):
            j = i + d
            if j < 0 or j >= n:
                Vt[r, j % n] += system.diagonals[k + d, i]
    U = np.zeros((n, 2 * k))
    U[rows, np.arange(2 * k)] = 1.0
    return U, Vt


def _band_storage(system: CyclicBandedSystem) -> np.ndarray:
    # LAPACK layout: ab[k + i - j, j] = A[i, j].
    n, k = system.n, system.half_bandwidth
    ab = np.zeros((2 * k + 1, n))
    for d in range(-k, k + 1):
        # entry A[i, i + d] sits in row k - d, column i + d
        if d >= 0:
            ab[k - d, d:] = system.diagonals[k + d, : n - d]
        else:
            ab[k - d, : n + d] = system.diagonals[k + d, -d:]
    return ab


def solve_cyclic_banded(system: CyclicBandedSystem) -> np.ndarray:
    """Solve a periodic band system in ``O(n k^2)``.

    The non-wrapping band is factored by LAPACK's pivoted band LU; the
    wrap-around corner blocks are a rank-``2k`` update handled through the
    Woodbury identity with a ``2k x 2k`` capacitance matrix.
    """
    n, k = system.n, system.half_bandwidth
    scale = float(np.max(np.abs(system.diagonals)))
    if scale == 0.0:
        raise SingularMatrixError("zero matrix")
    U, Vt = _corner_factors(system)
    ab = _band_storage(system)
    rhs = np.column_stack([system.rhs, U])
    try:
        sol = solve_banded((k, k), ab, rhs, check_finite=False)
    except LinAlgError as exc:
        raise SingularMatrixError(f"band part singular: {exc}") from None
    if not np.all(np.isfinite(sol)):
        raise SingularMatrixError("band solve produced non-finite values")
    y, Z = sol[:, 0], sol[:, 1:]
    cap = np.eye(2 * k) + Vt @ Z
    # capacitance singular <=> full matrix singular
    cap_scale = max(1.0, float(np.max(np.abs(cap))))
    x = y - Z @ lu_solve(lu_factor(cap, scale=cap_scale), Vt @ y)
    resid = float(np.max(np.abs(system.matvec(x) - system.rhs)))
    xmax = float(np.max(np.abs(x)))
    bound = 1e-8 * (scale * (2 * k + 1) * xmax + float(np.max(np.abs(system.rhs))))
    if not np.isfinite(resid) or resid > bound:
        raise SingularMatrixError("cyclic solve is numerically singular")
    return x


def low_pass_filter(values, preserve_ends: bool = True) -> np.ndarray:
    """Binomial (1, 2, 1)/4 smoothing.

    Interior points become ``(v[i-1] + 2 v[i] + v[i+1]) / 4``. With
    ``preserve_ends`` the two end values are copied; otherwise each end uses
    its mirror neighbour as ghost value (``v[-1] = v[1]``).
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 3:
        raise ValueError("low_pass_filter needs a 1-D vector of length >= 3")
    out = v.copy()
    out[1:-1] = 0.25 * (v[:-2] + 2.0 * v[1:-1] + v[2:])
    if not preserve_ends:
        out[0] = 0.5 * (v[0] + v[1])
        out[-1] = 0.5 * (v[-1] + v[-2])
    return out


def trapezoid_integral(values, h: float, periodic: bool = False) -> float:
    """Trapezoidal rule on a uniform grid; periodic grids omit the duplicate end."""
    if not h > 0:
        raise ValueError("h must be positive")
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0
    if periodic:
        return float(h * np.sum(v))
    if v.size == 1:
        return 0.0
    return float(h * (0.5 * v[0] + np.sum(v[1:-1]) + 0.5 * v[-1]))
