"""Truncated Euler-Maruyama simulation of stochastic delay equations and
polynomial-stability analysis."""

from .errors import MTEMError
from .experiments import build_example, run_reproduction
from .integrator import (PathRecord, SimulationGrid, delay_lag, lookup_state, mtem_step,
                         simulate_ensemble, simulate_path)
from .model import (CoefficientSet, DelayFunction, InitialHistory, SddeProblem, check_khasminskii,
                    check_truncation_compatibility, constant_delay, constant_history,
                    pantograph_delay, relaxing_delay, stability_margin, validate_problem)
from .polynomial import PolynomialFamily
from .rng import BrownianSource
from .stability import (c_tilde_unbounded, counting_check, decay_statistics, epsilon_window,
                        mean_square_statistic, solve_c_tilde_bounded, solve_gamma0_exact)
from .truncation import (TruncatedCoefficients, TruncationPolicy, dissipativity_witness,
                         lipschitz_witness, power_policy, truncated_diffusion, truncated_drift,
                         truncation_factor)

__version__ = "0.1.0"
