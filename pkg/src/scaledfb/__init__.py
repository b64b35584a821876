"""Scaled inertial forward-backward methods with variable diagonal metrics.

The package solves ``min f(x) + g(x)`` with f smooth (Kullback-Leibler,
smoothed total variation, quadratic) and g convex with a closed-form scaled
proximity operator, and ships the baselines and seeded test problems used to
compare them.
"""

from .metric import BoundSchedule, DiagonalMetric, build_metric, verify_sequence_conditions
from .objectives import HypersurfacePotential, KullbackLeibler, QuadraticForm
from .prox import L1Norm, NonnegIndicator, NonnegL1, SimplexIndicator, project_simplex, scaled_prox
from .solvers import (ALGORITHMS, CompositeProblem, InertiaSchedule, NumericalFailure,
                      SolverConfig, SolverRun, StopRule, run)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "BoundSchedule", "CompositeProblem", "DiagonalMetric",
    "HypersurfacePotential", "InertiaSchedule", "KullbackLeibler", "L1Norm", "NonnegIndicator",
    "NonnegL1", "NumericalFailure", "QuadraticForm", "SimplexIndicator", "SolverConfig",
    "SolverRun", "StopRule", "build_metric", "project_simplex", "run", "scaled_prox",
    "verify_sequence_conditions",
]
