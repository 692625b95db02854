"""Desk-scale estimation of observable means and partition functions.

Everything runs on explicit state vectors and dense matrices, so the costs
are exponential in qubit count by design; the point is exact cross-checking
of the estimators, not scale.
"""

__version__ = "0.1.0"

from .circuit import (
    CircuitConfig,
    Gate,
    GateSequence,
    StateVector,
    apply_controlled_evolution,
    apply_inverse_dft,
    apply_tomography_multiplexor,
    compose_gate_unitary,
    expand_multiplexor,
    leakage_amplitude,
    multiplexor_block,
    prepare_initial_state,
    run_tomography_circuit,
)
from .estimation import (
    EmpiricalDistribution,
    SampleRecord,
    ancilla_zero_probability,
    empirical_distribution,
    estimate_diag_element,
    sample_measurements,
    samples_from_csv,
    samples_to_csv,
)
from .numerics import (
    DomainError,
    FunctionSpec,
    HermitianOperator,
    SpectralDecomposition,
    UnitaryOperator,
    eigendecompose,
    exact_diag_element,
    exact_mean,
    exact_partition,
    function_of_hermitian,
    matrix_from_json,
    matrix_to_json,
    unitary_exp,
    validate_density,
)
from .sampler import (
    ChainConfig,
    ChainRun,
    MarkovChain,
    SamplerError,
    build_metropolis_matrix,
    chain_eigenvalues,
    metropolis_sample,
    phase_gap,
    ratio_from_weights,
    run_chain,
    spectral_gap,
    szegedy_walk_operator,
    trajectory_to_csv,
    walk_eigenphases,
)
from .scenarios import (
    EstimateReport,
    ScenarioSpec,
    choose_dt,
    choose_gamma,
    mu_of_x,
    run_scenario_mean,
    run_scenario_partition,
    shift_nonnegative,
    signed_partition,
    split_signed_coeffs,
    trace_ratio,
)

__all__ = [
    "CircuitConfig",
    "ChainConfig",
    "ChainRun",
    "DomainError",
    "EmpiricalDistribution",
    "EstimateReport",
    "FunctionSpec",
    "Gate",
    "GateSequence",
    "HermitianOperator",
    "MarkovChain",
    "SampleRecord",
    "SamplerError",
    "ScenarioSpec",
    "SpectralDecomposition",
    "StateVector",
    "UnitaryOperator",
    "ancilla_zero_probability",
    "apply_controlled_evolution",
    "apply_inverse_dft",
    "apply_tomography_multiplexor",
    "build_metropolis_matrix",
    "chain_eigenvalues",
    "choose_dt",
    "choose_gamma",
    "compose_gate_unitary",
    "eigendecompose",
    "empirical_distribution",
    "estimate_diag_element",
    "exact_diag_element",
    "exact_mean",
    "exact_partition",
    "expand_multiplexor",
    "function_of_hermitian",
    "leakage_amplitude",
    "matrix_from_json",
    "matrix_to_json",
    "metropolis_sample",
    "mu_of_x",
    "multiplexor_block",
    "phase_gap",
    "prepare_initial_state",
    "ratio_from_weights",
    "run_chain",
    "run_scenario_mean",
    "run_scenario_partition",
    "run_tomography_circuit",
    "sample_measurements",
    "samples_from_csv",
    "samples_to_csv",
    "shift_nonnegative",
    "signed_partition",
    "spectral_gap",
    "split_signed_coeffs",
    "szegedy_walk_operator",
    "trace_ratio",
    "trajectory_to_csv",
    "unitary_exp",
    "validate_density",
    "walk_eigenphases",
]
