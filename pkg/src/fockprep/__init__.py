"""Truncated Fock-space simulation of conditional state preparation."""

__version__ = "0.1.0"

from .circuit import (
    ApdClick,
    Cascade,
    FockProjector,
    LossChannel,
    PovmElement,
    PreparationResult,
    TmsvSource,
    cascade_click_probability,
    find_d0,
    loss_kraus,
    make_povm,
    parse_descriptor,
    prepare_conditional,
    tmsv_coeffs,
)
from .dispmat import GuardReport, displacement_closed_form, displacement_recurrent, laguerre_assoc
from .errors import DimensionError, FockPrepError, NoSolutionError, NumericGuardError
from .expm import expm, expm_array
from .fock import (
    DensityOperator,
    Provenance,
    PureState,
    TruncatedOperator,
    column_norms,
    cutoff_error,
    kron,
    make_annihilation,
    make_creation,
    partial_trace,
)
from .metrics import (
    QuadratureMoments,
    fidelity_qubit,
    nonlinear_variance,
    optimal_cubic_state,
    quadrature_moments,
)
from .tame import D1Cache, TameConfig, error_matrix, find_dimension, tame_build
