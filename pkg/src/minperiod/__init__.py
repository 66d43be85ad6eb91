"""Minimal periods of periodic solutions of Lipschitz ODEs.

A nonconstant periodic solution of ``x' = f(x)`` with ``f`` Lipschitz
(constant ``L``) in a norm has period ``T >= 2*pi / L``. This package
computes the ingredients (induced norms, spectra, periods of simulated
orbits) and checks the bound and its intermediate inequalities.
"""

from .errors import InputError, MinPeriodError, NumericError, OptimizerStall
from .norms import VectorNorm, induced_norm, linf, lp, norm_eval, weighted
from .odesim import PeriodEstimate, Trajectory, analytic_period, detect_period, integrate
from .spectral import check_attainment, eigenvalues, rotate_to_imaginary, spectral_radius
from .systems import (
    LinearSystem,
    LipschitzField,
    complex_diagonal,
    from_matrix,
    make_field,
    planar_rotation,
    random_antihermitian,
    random_antisymmetric,
    system_from_spec,
)
from .verify import (
    BoundReport,
    bound_check,
    check_lemma1,
    check_wirtinger,
    estimate_lipschitz,
    search_min_k,
    shifted_difference,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "InputError", "LinearSystem", "LipschitzField", "MinPeriodError",
    "NumericError", "OptimizerStall", "PeriodEstimate", "Trajectory", "VectorNorm",
    "analytic_period", "bound_check", "check_attainment", "check_lemma1", "check_wirtinger",
    "complex_diagonal", "detect_period", "eigenvalues", "estimate_lipschitz", "from_matrix",
    "induced_norm", "integrate", "linf", "lp", "make_field", "norm_eval", "planar_rotation",
    "random_antihermitian", "random_antisymmetric", "rotate_to_imaginary", "search_min_k",
    "shifted_difference", "spectral_radius", "system_from_spec", "weighted",
]
