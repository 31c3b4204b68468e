"""Numerical engine for the analytic KAM iteration.

Truncated Fourier-Taylor algebra, brute-force Diophantine certification,
the small-divisor solver, generating functions and their time-1 canonical
flows, the Newton-type iteration with its explicit constant chain and
schedules, and invariant-torus diagnostics.
"""

from .cohomology import amplification_estimate, solve, solve_vector
from .config import PRESETS, RunConfig, load_config, prepare_run
from .constants import (ConstantsChain, Schedule, build_schedule,
                        constants_chain, series_tail_check)
from .diophantine import FrequencyVector, catalog, certify
from .engine import (EngineOptions, HamiltonianDecomposition, RunReport,
                     StepReport, kam_step, normal_form_series,
                     quadratic_fit_exponent, run_iteration, torus_residual,
                     verify_main_theorem)
from .flows import (FlowWindow, SimpleCanonicalMap, TransformationChain,
                    check_symplectic, compose, evaluate_chain, flow_window,
                    integrate_flow, jacobian_growth_audit)
from .linearized import (GeneratingFunction, NormalFormDelta, build_delta_N,
                         build_generating_function, matrix_perturb_inverse,
                         solve_U, solve_V, solve_lambda)
from .series import (DomainSpec, FTSeries, cauchy_bound, cubic_tail_bound,
                     poisson)

__version__ = "0.1.0"
