"""Operator gauge symmetry for matrix-valued electromagnetic fields.

Potentials are Hermitian-matrix-valued fields with exact derivatives.  On
top of them sit operator gauge transformations and the covariant field
strength, plus the operator Maxwell equations with their vacuum
polarization terms.  See the README for a tour.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    CapabilityError,
    ConditioningError,
    CouplingError,
    DimensionMismatchError,
    OGTError,
    PeriodicityError,
    RangeError,
    ScenarioError,
)
from .field_expr import AnalyticField, Evaluator, Expr, Monomial, Trig, evaluate
from .gauge import GaugePotential, GaugeTransformation, transform_potential
from .operator_core import PhysicalConstants
from .strength import FieldStrength, field_strength

__all__ = [
    "AnalyticField",
    "CapabilityError",
    "ConditioningError",
    "CouplingError",
    "DimensionMismatchError",
    "Evaluator",
    "Expr",
    "FieldStrength",
    "GaugePotential",
    "GaugeTransformation",
    "Monomial",
    "OGTError",
    "PeriodicityError",
    "PhysicalConstants",
    "RangeError",
    "ScenarioError",
    "Trig",
    "transform_potential",
    "__version__",
    "evaluate",
    "field_strength",
]
