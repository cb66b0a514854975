"""Power-law generalized KdV equations.

The family handled here is

    u_t + (alpha * u**m)_x + (beta * u + gamma * u**n)_xxx = 0

which contains K(m, n) (alpha = gamma = 1, beta = 0), KdV, and the mixed
linear/nonlinear dispersion models KdV-K(2,2) and mKdV-K(3,3).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InapplicableModelError

__all__ = [
    "ModelSpec",
    "ipow",
    "flux_values",
    "flux_derivatives",
    "exact_compacton",
    "compacton_speed",
    "compacton_support",
    "travelling_wave_speed",
    "k_mn",
    "KDV",
    "KDV_K22",
    "MKDV_K33",
]


def ipow(u, k: int):
    """Integer power by repeated multiplication.

    Keeps ``ipow(-u, k) == -ipow(u, k)`` bit-for-bit for odd ``k``, which
    the odd-symmetry checks of the evolution code rely on.
    """
    if k == 0:
        return np.ones_like(u) if isinstance(u, np.ndarray) else 1.0
    out = u
    for _ in range(k - 1):
        out = out * u
    return out


@dataclass(frozen=True)
class ModelSpec:
    """Coefficients of ``u_t + (alpha u^m)_x + (beta u + gamma u^n)_xxx = 0``."""

    alpha: float
    m: int
    beta: float
    gamma: float
    n: int

    def __post_init__(self):
        for name in ("m", "n"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("alpha", "beta", "gamma"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.beta == 0 and self.gamma == 0:
            raise ValueError("model has no dispersion (beta = gamma = 0)")

    def odd_symmetric(self) -> bool:
        """True when u -> -u maps solutions to solutions."""
        return self.m % 2 == 1 and self.n % 2 == 1

    @property
    def is_pure_kmn(self) -> bool:
        return self.beta == 0.0

    def admits_exact_compacton(self) -> bool:
        return (
            self.alpha == 1.0
            and self.gamma == 1.0
            and self.beta == 0.0
            and self.m == self.n
            and self.n >= 2
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            alpha=d["alpha"], m=d["m"], beta=d["beta"], gamma=d["gamma"], n=d["n"]
        )

    def __str__(self):
        return (
            f"ModelSpec(alpha={self.alpha:g}, m={self.m}, beta={self.beta:g}, "
            f"gamma={self.gamma:g}, n={self.n})"
        )


def k_mn(m: int, n: int) -> ModelSpec:
    """The K(m, n) equation ``u_t + (u^m)_x + (u^n)_xxx = 0``."""
    return ModelSpec(alpha=1.0, m=m, beta=0.0, gamma=1.0, n=n)


KDV = ModelSpec(alpha=1.0, m=2, beta=1.0, gamma=0.0, n=1)
KDV_K22 = ModelSpec(alpha=2.0, m=2, beta=1.0, gamma=1.0, n=2)
MKDV_K33 = ModelSpec(alpha=2.0, m=3, beta=1.0, gamma=1.0, n=3)


def flux_values(model: ModelSpec, u):
    """Convective flux ``g = alpha u^m`` and dispersive flux ``w = beta u + gamma u^n``.

    Works on scalars and arrays alike.
    """
    g = model.alpha * ipow(u, model.m)
    w = model.beta * u + model.gamma * ipow(u, model.n)
    return g, w


def flux_derivatives(model: ModelSpec, u):
    """Derivatives ``dg/du`` and ``dw/du``."""
    dg = model.alpha * model.m * ipow(u, model.m - 1)
    dw = model.beta + model.gamma * model.n * ipow(u, model.n - 1)
    return dg, dw


def _require_compacton(model: ModelSpec):
    if not model.admits_exact_compacton():
        raise InapplicableModelError(
            f"closed-form compacton needs pure K(n,n) with n >= 2, got {model}"
        )


def compacton_support(model: ModelSpec) -> float:
    """Half-width ``n pi / (n - 1)`` of the K(n,n) compacton support."""
    _require_compacton(model)
    n = model.n
    return n * math.pi / (n - 1)


def compacton_speed(model: ModelSpec, amplitude: float) -> float:
    """Speed of the K(n,n) compacton with peak value ``amplitude``.

    Inverts ``amplitude = (2 lambda n / (n + 1))**(1/(n-1))``.
    """
    _require_compacton(model)
    n = model.n
    return amplitude ** (n - 1) * (n + 1) / (2.0 * n)


def exact_compacton(model: ModelSpec, lam: float, xi):
    """Closed-form K(n,n) compacton evaluated at ``xi`` (scalar or array).

    Zero outside ``|xi| <= n pi / (n - 1)``; the support edge itself
    evaluates to exactly zero.
    """
    _require_compacton(model)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    n = model.n
    edge = n * math.pi / (n - 1)
    xi_arr = np.asarray(xi, dtype=float)
    inside = np.abs(xi_arr) < edge
    c = np.cos((n - 1) / (2.0 * n) * np.where(inside, xi_arr, 0.0))
    base = 2.0 * lam * n / (n + 1) * c * c
    out = np.where(inside, base ** (1.0 / (n - 1)), 0.0)
    if np.ndim(xi) == 0:
        return float(out)
    return out


def travelling_wave_speed(model: ModelSpec, amplitude: float) -> float:
    """Continuous travelling-wave speed for a given peak amplitude.

    Multiplying ``-lam f + alpha f^m + w(f)'' = 0`` by ``w(f)'`` and
    integrating from the decayed tail to the crest (where ``w' = 0``) gives

        lam = alpha * int_0^A f^m w'(f) df / int_0^A f w'(f) df

    with ``w'(f) = beta + gamma n f^(n-1)``. Independent of any grid, so it
    serves as a reference for the discrete eigenvalue in both boundary modes.
    """
    a, m, b, g, n = model.alpha, model.m, model.beta, model.gamma, model.n
    A = float(amplitude)
    num = a * (b * A ** (m + 1) / (m + 1) + g * n * A ** (m + n) / (m + n))
    den = b * A**2 / 2.0 + g * n * A ** (n + 1) / (n + 1)
    return num / den
