"""Backaction-evasion quadrature-measurement simulator in truncated Fock space."""

__version__ = "0.1.0"

from .errors import (
    BaeQndError,
    DegenerateConditioningError,
    DimensionMismatchError,
    GridTooNarrowError,
    InvalidDimensionError,
    InvalidParameterError,
    OutOfRangeError,
    SetupMismatchError,
    TruncationOverflowError,
)
from .fock import (
    FockOperator,
    FockState,
    QuadratureGrid,
    annihilation,
    creation,
    make_grid,
    number_operator,
    oscillator_wavefunction,
    quadrature_x,
    quadrature_y,
    trusted_levels,
    wavefunction_table,
)
from .jumps import (
    CorrelationReport,
    OutcomeRecord,
    jump_probability,
    measured_correlation,
    operator_correlation,
    run_experiment,
    sample_outcome,
    sample_photon_number,
    summarize,
)
from .measurement import (
    MeasurementModel,
    OutcomeDensityTable,
    asymptotic_p1,
    completeness_defect,
    conditional_state,
    joint_photon_density,
    measurement_operator,
    measurement_operator_squared,
    outcome_density,
    outcome_density_table,
    truncated_square_defect,
)
from .setup_model import (
    Calibration,
    SetupCircuit,
    SetupParams,
    TwoModeState,
    beam_splitter,
    calibrate_outcome_map,
    equivalence_defect,
    opa_squeezer,
    run_setup,
    squeeze_matrix,
)

__all__ = [
    "BaeQndError",
    "Calibration",
    "CorrelationReport",
    "DegenerateConditioningError",
    "DimensionMismatchError",
    "FockOperator",
    "FockState",
    "GridTooNarrowError",
    "InvalidDimensionError",
    "InvalidParameterError",
    "MeasurementModel",
    "OutOfRangeError",
    "OutcomeDensityTable",
    "OutcomeRecord",
    "QuadratureGrid",
    "SetupCircuit",
    "SetupMismatchError",
    "SetupParams",
    "TruncationOverflowError",
    "TwoModeState",
    "annihilation",
    "asymptotic_p1",
    "beam_splitter",
    "calibrate_outcome_map",
    "completeness_defect",
    "conditional_state",
    "creation",
    "equivalence_defect",
    "joint_photon_density",
    "jump_probability",
    "make_grid",
    "measured_correlation",
    "measurement_operator",
    "measurement_operator_squared",
    "number_operator",
    "opa_squeezer",
    "operator_correlation",
    "oscillator_wavefunction",
    "outcome_density",
    "outcome_density_table",
    "quadrature_x",
    "quadrature_y",
    "run_experiment",
    "run_setup",
    "sample_outcome",
    "sample_photon_number",
    "squeeze_matrix",
    "summarize",
    "truncated_square_defect",
    "trusted_levels",
    "wavefunction_table",
]
