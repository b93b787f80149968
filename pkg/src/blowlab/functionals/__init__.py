"""Test functions, nonexistence functionals and scaling laws."""

from .exponents import (
    blowup_upper_bound,
    conjugate,
    critical_exponent_lower_bound,
    exponent_set,
    theoretical_exponent,
    young_constant,
)
from .families import TestFunctionFamily, make_family, psi_eval
from .integrals import FunctionalValues, QuadratureNonconvergence, functional_integrals
from .profiles import CutoffProfile, ProfileRejected, TimeBump, integrability_check, profile_eval
from .scaling import FunctionalReport, fit_scaling
from .weak import weak_form_residual, young_split_check

__all__ = [
    "CutoffProfile",
    "TimeBump",
    "ProfileRejected",
    "TestFunctionFamily",
    "FunctionalValues",
    "FunctionalReport",
    "QuadratureNonconvergence",
    "blowup_upper_bound",
    "conjugate",
    "critical_exponent_lower_bound",
    "exponent_set",
    "fit_scaling",
    "functional_integrals",
    "integrability_check",
    "make_family",
    "profile_eval",
    "psi_eval",
    "theoretical_exponent",
    "young_constant",
    "young_split_check",
    "weak_form_residual",
]
