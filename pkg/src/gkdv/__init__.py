"""Numerical solitons of power-law generalized KdV equations.

Profiles are computed as a discrete nonlinear eigenvalue problem on a
truncated half line (:mod:`gkdv.eigen`), then embedded and evolved with a
periodic Crank-Nicolson scheme (:mod:`gkdv.evolve`) and post-processed for
collision elasticity and ripple (:mod:`gkdv.analysis`).
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    KDV,
    KDV_K22,
    MKDV_K33,
    ModelSpec,
    compacton_speed,
    exact_compacton,
    flux_values,
    k_mn,
    travelling_wave_speed,
)
from .eigen import (  # noqa: E402
    BoundaryMode,
    DiscreteEigenProblem,
    SolitonProfile,
    SolverConfig,
    newton_solve,
    scale_profile,
    solve_profile,
    verify_against_exact,
)
from .evolve import (  # noqa: E402
    EvolveConfig,
    PeriodicField,
    embed,
    invariants,
    make_field,
    run,
    step,
)

__all__ = [
    "__version__",
    "ModelSpec",
    "k_mn",
    "KDV",
    "KDV_K22",
    "MKDV_K33",
    "flux_values",
    "exact_compacton",
    "compacton_speed",
    "travelling_wave_speed",
    "BoundaryMode",
    "DiscreteEigenProblem",
    "SolitonProfile",
    "SolverConfig",
    "newton_solve",
    "solve_profile",
    "scale_profile",
    "verify_against_exact",
    "PeriodicField",
    "EvolveConfig",
    "make_field",
    "embed",
    "step",
    "run",
    "invariants",
]
