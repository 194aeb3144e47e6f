"""Optimal control of a semilinear elliptic PDE.

Thin Python surface over the C++ core: mesh construction, state/adjoint
solves, projected-gradient control solves and perturbation stability sweeps.
Fields are plain numpy vectors indexed like ``Mesh.nodes``.
"""

from ._core import (
    Coefficients,
    ConfigError,
    Mesh,
    Problem,
    SolverError,
    build_mesh,
    default_eps_grid,
    evaluate_J,
    evaluate_gradient,
    inner_l2,
    isotropic_coefficients,
    make_problem,
    norm,
    solve_control,
    solve_state,
    stability_sweep,
)

__all__ = [
    "Coefficients",
    "ConfigError",
    "Mesh",
    "Problem",
    "SolverError",
    "build_mesh",
    "default_eps_grid",
    "evaluate_J",
    "evaluate_gradient",
    "inner_l2",
    "isotropic_coefficients",
    "make_problem",
    "norm",
    "solve_control",
    "solve_state",
    "stability_sweep",
]
