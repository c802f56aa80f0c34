"""oscbath: driven damped quantum oscillator in a boson bath.

Closed-form master-equation kernels including the terms generated by an
initially thermalized (correlated) system+bath state, the long-time
Lindblad limit, fixed-step propagators, and an exact small-system oracle
for validation.
"""

from .bath import BathSpec, OhmicParams, bose_occupation, discretize_ohmic, spectral_density_estimate
from .kernels import (KernelCoefficients, MarkovLimits, cancellation_residual, gamma0,
                      kernel_coefficients, ki_asymptotic_coefficients, ki_coefficients,
                      lsi_coefficients, markov_limits, phase_integral)
from .operators import (DensityMatrix, DimensionError, FockOperator, annihilation_op,
                        commutator, creation_op, embed, gibbs_state, identity_op,
                        matrix_exp, number_op, partial_trace, partial_trace_op,
                        tensor_product)
from .oracle import (FullModel, GibbsExpansionReport, ProjectorReport, build_hamiltonian,
                     exact_reduced_dynamics, full_state_at, gibbs_expansion_check,
                     projector_algebra_check, trace_distance)
from .propagator import (DRIVE_NONE, DriveSpec, StabilityError, Superoperator, Trajectory,
                         build_generator, lindblad_propagate, propagate)

__version__ = "0.1.0"

__all__ = [
    "BathSpec", "OhmicParams", "bose_occupation", "discretize_ohmic",
    "spectral_density_estimate",
    "KernelCoefficients", "MarkovLimits", "cancellation_residual", "gamma0",
    "kernel_coefficients", "ki_asymptotic_coefficients", "ki_coefficients",
    "lsi_coefficients", "markov_limits", "phase_integral",
    "DensityMatrix", "DimensionError", "FockOperator", "annihilation_op", "commutator",
    "creation_op", "embed", "gibbs_state", "identity_op", "matrix_exp", "number_op",
    "partial_trace", "partial_trace_op", "tensor_product",
    "FullModel", "GibbsExpansionReport", "ProjectorReport", "build_hamiltonian",
    "exact_reduced_dynamics", "full_state_at", "gibbs_expansion_check",
    "projector_algebra_check", "trace_distance",
    "DRIVE_NONE", "DriveSpec", "StabilityError", "Superoperator", "Trajectory",
    "build_generator", "lindblad_propagate", "propagate",
]
