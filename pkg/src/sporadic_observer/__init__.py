"""Observer design and certification for plants sampled at sporadic instants."""

from .design import (AllInfeasible, DesignRequest, DesignResult, IllConditionedRecovery, InfeasibleAtLowerBound,
                     TradeoffCurve, design_min_gamma, maximize_T2, pareto_sweep, recover_gains, two_stage_refine)
from .hinf import hinf_necessary, hinf_norm
from .lmi import (Certificate, build_corollary_problem, build_design_problem, build_existence_problem,
                  build_verification_problem, certificate_from_solution, convex_decomposition,
                  count_scalar_variables, eval_M)
from .model import ObserverGains, PlantModel, SamplingSpec, assemble_error_matrices, validate_plant
from .sdp import SdpSolution, SolverOptions, Status, residual, solve
from .sdpa import export_sdpa, parse_sdpa
from .sim import HybridArc, HybridState, JitterSequence, SignalSpec, simulate
from .verify import VerificationReport, check_iss_bound, iss_constants, verify_certificate

__version__ = "0.1.0"
