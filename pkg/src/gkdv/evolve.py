"""Crank-Nicolson time stepping on a periodic grid.

The semi-discrete equation is written in flux form,

    du_i/dt + D1 g(u)_i + D3 w(u)_i = 0,

with centred stencils

    D1 v_i = (v_{i+1} - v_{i-1}) / (2h)
    D3 v_i = (v_{i+2} - 2 v_{i+1} + 2 v_{i-1} - v_{i-2}) / (2h^3)

and indices taken modulo the number of points. Both stencils telescope on a
periodic grid, so ``h * sum(u)`` is conserved up to the Newton tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .eigen import SolitonProfile
from .errors import ConvergenceError, OverlapError, SingularMatrixError, StepError
from .model import ModelSpec, flux_derivatives, flux_values
from .numerics import CyclicBandedSystem, solve_cyclic_banded

__all__ = [
    "PeriodicField",
    "EvolveConfig",
    "RunResult",
    "make_field",
    "embed",
    "d1",
    "d3",
    "rhs",
    "step",
    "run",
    "invariants",
    "default_dt",
]

OVERLAP_LEVEL = 1e-6
TAIL_CUT = 1e-12
OVERFLOW = 1e6

# stencil weights by offset, in units of 1/(2h) and 1/(2h^3)
_D1 = {-1: -1.0, 1: 1.0}
_D3 = {-2: -1.0, -1: 2.0, 1: -2.0, 2: 1.0}


@dataclass
class PeriodicField:
    """Field values ``u_i`` at ``x_left + i h``, ``i = 0..M-1``, at time ``t``."""

    x_left: float
    x_right: float
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim != 1 or self.u.size < 8:
            raise ValueError("periodic field needs at least 8 points")
        if not self.x_right > self.x_left:
            raise ValueError("empty domain")

    @property
    def M(self) -> int:
        return self.u.size

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    @property
    def h(self) -> float:
        return self.length / self.M

    @property
    def x(self) -> np.ndarray:
        return self.x_left + np.arange(self.M) * self.h

    def copy(self) -> "PeriodicField":
        return replace(self, u=self.u.copy())

    def wrap(self, d):
        """Map displacements into ``[-L/2, L/2)``."""
        L = self.length
        return (np.asarray(d) + 0.5 * L) % L - 0.5 * L


def make_field(x_left: float, x_right: float, h: float, u=None, t: float = 0.0) -> PeriodicField:
    """Zero (or given) field on ``[x_left, x_right)`` with spacing ``h``."""
    L = x_right - x_left
    M = int(round(L / h))
    if abs(M * h - L) > 1e-9 * L:
        raise ValueError(f"domain length {L} is not a multiple of h={h}")
    if u is None:
        u = np.zeros(M)
    return PeriodicField(x_left, x_right, u, t)


def embed(profiles, grid: PeriodicField) -> PeriodicField:
    """Superpose solved profiles at given centres.

    Parameters
    ----------
    profiles : list of (SolitonProfile, center, sign)
    grid : PeriodicField
        Supplies the domain and resolution; its values are ignored.

    Raises
    ------
    OverlapError
        If two waves both exceed ``OVERLAP_LEVEL`` in magnitude at some grid point.
    """
    x = grid.x
    u = np.zeros(grid.M)
    above = np.zeros(grid.M, dtype=int)
    for item in profiles:
        profile, center, sign = (tuple(item) + (1,))[:3]
        if sign not in (1, -1, 1.0, -1.0):
            raise ValueError(f"sign must be +1 or -1, got {sign}")
        d = grid.wrap(x - center)
        contrib = profile(d)
        contrib[np.abs(contrib) < TAIL_CUT] = 0.0
        if 2.0 * profile.support_radius(TAIL_CUT) > grid.length:
            raise OverlapError("profile tail does not fit in the periodic domain")
        above += np.abs(contrib) > OVERLAP_LEVEL
        u += sign * contrib
    if np.any(above > 1):
        where = grid.x[np.argmax(above > 1)]
        raise OverlapError(f"embedded waves overlap above {OVERLAP_LEVEL:g} near x={where:g}")
    return replace(grid, u=u)


def d1(v: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * h)


def d3(v: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(v, -2) - 2.0 * np.roll(v, -1) + 2.0 * np.roll(v, 1) - np.roll(v, 2)) / (
        2.0 * h**3
    )


def rhs(model: ModelSpec, u: np.ndarray, h: float) -> np.ndarray:
    """Spatial operator ``D1 g(u) + D3 w(u)``."""
    g, w = flux_values(model, u)
    return d1(g, h) + d3(w, h)


@dataclass
class EvolveConfig:
    dt: float
    t_end: float
    snapshot_stride: int = 1
    newton_tol: float = 1e-12
    newton_max: int = 30
    linearized: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be >= 0")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")


def _jacobian_bands(model, v, h, half_dt):
    dg, dw = flux_derivatives(model, v)
    if np.ndim(dw) == 0:
        dw = np.full_like(v, dw)
    bands = np.zeros((5, v.size))
    bands[2] = 1.0
    for d, c in _D1.items():
        bands[2 + d] += half_dt * c / (2.0 * h) * np.roll(dg, -d)
    for d, c in _D3.items():
        bands[2 + d] += half_dt * c / (2.0 * h**3) * np.roll(dw, -d)
    return bands


def step(field: PeriodicField, model: ModelSpec, dt: float, cfg: EvolveConfig | None = None) -> PeriodicField:
    """One Crank-Nicolson step of size ``dt``.

    Solves ``v - u + dt/2 (N(v) + N(u)) = 0`` by Newton with the exact
    cyclic pentadiagonal Jacobian. ``dt`` may be negative (backward step).
    The input field is never modified.

    Raises
    ------
    StepError
        Newton failed to reach ``newton_tol`` (try a smaller ``dt``) or the
        field overflowed.
    """
    if cfg is None:
        cfg = EvolveConfig(dt=abs(dt) or 1.0, t_end=0.0)
    if dt == 0:
        return field.copy()
    u = field.u
    h = field.h
    half_dt = 0.5 * dt
    base = u - half_dt * rhs(model, u, h)
    v = u.copy()
    R = v + half_dt * rhs(model, v, h) - base
    rnorm = float(np.max(np.abs(R)))
    max_iter = 1 if cfg.linearized else cfg.newton_max
    for _ in range(max_iter):
        if rnorm <= cfg.newton_tol:
            break
        bands = _jacobian_bands(model, v, h, half_dt)
        try:
            delta = solve_cyclic_banded(CyclicBandedSystem(bands, -R))
        except SingularMatrixError as exc:
            raise StepError(f"singular step Jacobian: {exc}", t=field.t) from None
        s = 1.0
        while True:
            trial = v + s * delta
            Rt = trial + half_dt * rhs(model, trial, h) - base
            tnorm = float(np.max(np.abs(Rt)))
            if tnorm < rnorm or s <= 2.0**-8:
                break
            s *= 0.5
        v, R, rnorm = trial, Rt, tnorm
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > OVERFLOW:
            raise StepError(f"field overflow (|u| > {OVERFLOW:g})", t=field.t)
    if rnorm > cfg.newton_tol and not cfg.linearized:
        raise StepError(
            f"Newton diverged in time step (residual {rnorm:.3e}); try a smaller dt",
            t=field.t,
        )
    return PeriodicField(field.x_left, field.x_right, v, field.t + dt)


def invariants(field: PeriodicField):
    """Discrete mass ``h sum u`` and momentum ``h sum u^2``."""
    u = field.u
    return float(field.h * np.sum(u)), float(field.h * np.sum(u * u))


@dataclass
class RunResult:
    """Snapshots and time series of the conserved quantities."""

    model: ModelSpec
    config: EvolveConfig
    snapshots: list = field(default_factory=list)
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    momentum: list = field(default_factory=list)
    steps: int = 0
    embedded: list = field(default_factory=list)

    def record(self, f: PeriodicField):
        if self.times and f.t < self.times[-1]:
            raise ValueError("snapshots must be appended in time order")
        m, p = invariants(f)
        self.snapshots.append(f.copy())
        self.times.append(f.t)
        self.mass.append(m)
        self.momentum.append(p)

    @property
    def final(self) -> PeriodicField:
        return self.snapshots[-1]

    def mass_drift(self) -> float:
        m = np.asarray(self.mass)
        return float(np.max(np.abs(m - m[0])) / max(1.0, abs(m[0])))

    def momentum_drift(self) -> float:
        p = np.asarray(self.momentum)
        return float(abs(p[-1] - p[0]) / max(abs(p[0]), 1e-300))


def run(
    field: PeriodicField,
    model: ModelSpec,
    cfg: EvolveConfig,
    progress=None,
    embedded=None,
) -> RunResult:
    """Advance ``field`` to ``t_end``, recording every ``snapshot_stride`` steps.

    The step count is ``ceil(t_end / dt)`` with the step shrunk so the run
    ends exactly at ``t_end``. The final state is always recorded.
    ``embedded`` (the ``(profile, center, sign)`` list used to build the
    initial field) is stored on the result for later analysis.
    """
    n_steps = int(math.ceil(cfg.t_end / cfg.dt - 1e-9)) if cfg.t_end > 0 else 0
    dt = cfg.t_end / n_steps if n_steps else cfg.dt
    out = RunResult(model=model, config=cfg, embedded=list(embedded or []))
    t0 = field.t
    cur = field.copy()
    out.record(cur)
    for k in range(1, n_steps + 1):
        try:
            cur = step(cur, model, dt, cfg)
        except (StepError, ConvergenceError) as exc:
            raise StepError(f"step failed at t={cur.t:.6g}: {exc}", t=cur.t) from exc
        cur.t = t0 + k * dt
        out.steps = k
        if k % cfg.snapshot_stride == 0 or k == n_steps:
            out.record(cur)
        if progress is not None:
            progress(k, n_steps, cur)
    return out


def default_dt(h: float, speeds=(1.0,), cap: float = 0.01) -> float:
    """``h/2 * min(1, 1/max|speed|)`` capped at ``cap``."""
    vmax = max((abs(s) for s in speeds), default=1.0)
    return min(cap, 0.5 * h * min(1.0, 1.0 / vmax if vmax > 0 else 1.0))
