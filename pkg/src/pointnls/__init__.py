"""Standing waves of NLS equations with delta and delta' point interactions.

Closed-form profiles on the line and on star graphs, discrete linearized
operators with exact inertia counts, the slope of the mass curve, stability
verdicts and conservative time evolution.
"""
from .domain import DiscreteDomain, Field, auto_truncation, h1_inner, h1_norm_sq, l2_inner
from .dynamics import EvolutionConfig, EvolutionTrace, conserved_quantities, evolve, orbital_distance
from .errors import (BlowupDetected, DomainMismatch, FactorizationBreakdown, InconsistentInputs,
                     IncompatibleSubspace, MatchingFailed, NoBracket, NoConvergence, NumericalError,
                     OutOfExistenceWindow, PointNLSError, SolverBreakdown, ValidationError,
                     WindowBoundaryTooClose)
from .gss import StabilityVerdict, analyze, classify
from .operators import (LinearizedOperator, SpectralReport, assemble, count_zeros, inertia_negative,
                        kernel_dim, low_eigenpairs, spectral_report)
from .profiles import (GRAPH_DELTA, GRAPH_DELTA_PRIME, LINE_DELTA, LINE_DELTA_PRIME,
                       LINE_DELTA_REPULSIVE, InteractionModel, ProfileFamily, ProfileSpec,
                       eval_profile, make_profile, stationary_residual, vertex_residuals)
from .slope import SlopeReport, find_omega_star, norm_sq_of_omega, slope_J

__version__ = "0.1.0"
