"""Spectral and Lie-algebraic controllability certificates for bilinear quantum systems."""

__version__ = "0.1.0"

from .config import DEFAULT_TOLERANCES, Tolerances
from .herm import (
    DimensionMismatch,
    HermitianOperator,
    NotHermitianError,
    NumericalFailure,
    SpectrumPoint,
    UnitaryOperator,
    commutator,
    eig_hermitian,
    evolve,
    hs_inner,
)
from .lie import (
    LieClosureResult,
    controllability_verdict,
    invariant_subspace_probe,
    lie_closure,
    simultaneous_verdict,
)
from .system import ControlledHamiltonian, OutsideRegion

__all__ = [
    "DEFAULT_TOLERANCES",
    "ControlledHamiltonian",
    "DimensionMismatch",
    "HermitianOperator",
    "LieClosureResult",
    "NotHermitianError",
    "NumericalFailure",
    "OutsideRegion",
    "SpectrumPoint",
    "Tolerances",
    "UnitaryOperator",
    "commutator",
    "controllability_verdict",
    "eig_hermitian",
    "evolve",
    "hs_inner",
    "invariant_subspace_probe",
    "lie_closure",
    "simultaneous_verdict",
]
