"""Spectral computations for the perturbed harmonic oscillator -d^2/dx^2 + x^2 + b(x)."""

__version__ = "0.1.0"

from .assembly import TruncatedOperator, assemble, assemble_block, operator_from_matrix, truncation_trust_index
from .counterexample import BlockSpec, DissipativeSpectrum, katsnelson_check, non_basis_witness
from .eigen import EigenDecomposition, Resolvent, eigen, eigvals, operator_norm
from .errors import (
    AccuracyError,
    AssemblyError,
    ConfigurationError,
    ContourError,
    ConvergenceError,
    DomainError,
    NotInVError,
    OscSpectraError,
    PoleError,
)
from .hermite import HermiteGrid, default_grid, eval_hermite, weighted_norm
from .hilbert import ShiftSequence, WeightSequence, a2_condition, apply_G, apply_G_tau, construct_weight
from .potential import Potential, decay_fit, t_exponent, v_norm_profile
from .projections import (
    EnclosureRegion,
    SpectralContext,
    build_enclosure,
    localize,
    riesz_projection,
    strip_projection,
)

__all__ = [
    "AccuracyError", "AssemblyError", "BlockSpec", "ConfigurationError", "ContourError", "ConvergenceError",
    "DissipativeSpectrum", "DomainError", "EigenDecomposition", "EnclosureRegion", "HermiteGrid", "NotInVError",
    "OscSpectraError", "PoleError", "Potential", "Resolvent", "ShiftSequence", "SpectralContext",
    "TruncatedOperator", "WeightSequence", "a2_condition", "apply_G", "apply_G_tau", "assemble", "assemble_block",
    "build_enclosure", "construct_weight", "decay_fit", "default_grid", "eigen", "eigvals", "eval_hermite",
    "katsnelson_check", "localize", "non_basis_witness", "operator_from_matrix", "operator_norm",
    "riesz_projection", "strip_projection", "t_exponent", "truncation_trust_index", "v_norm_profile",
    "weighted_norm",
]
