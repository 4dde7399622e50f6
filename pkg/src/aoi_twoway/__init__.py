"""Age of information over a two-way random-delay loop.

A monitor pulls samples from a source through a request link and an update
link, both with geometric service times.  The package provides closed-form
averages for the zero-wait and spaced-delivery policies, finite average-cost
decision processes for one or two outstanding requests with a relative
value iteration solver, and a seeded slot-level simulator that cross-checks
everything against the formulas.
"""

from .analytic import (AoiBreakdown, WaitThreshold, aoi_wait1, aoi_zw1,
                       aoi_zw2, beta_max, expected_x_given_busy, mean_wait,
                       optimal_beta, p_busy, sweep_grid, waiting_beneficial,
                       zw2_beats_zw1)
from .core import (AgeCap, CycleRecord, ServiceRates, average_aoi_from_cycles,
                   cap_value, clamp_age, sample_geometric)
from .mdp_one import (State1P, admissible_actions_1p, build_mdp_1p,
                      enumerate_states_1p, expected_cost_1p, n_states_1p,
                      state_index_1p, transitions_1p)
from .mdp_two import (State2P, admissible_actions_2p, build_mdp_2p,
                      enumerate_states_2p, expected_cost_2p, family_of,
                      n_states_2p, state_index_2p, transitions_2p)
from .rvi import (ChainStructureError, ConvergenceError, FiniteMdp,
                  MdpInvariantError, Solution, SolveConfig, build_finite_mdp,
                  evaluate_policy_exact, solve_rvi, write_kernel_csv,
                  write_solution_csv)
from .sim import (KernelCheckReport, PolicySpec, SimResult, SystemConfig,
                  Trajectory, empirical_kernel_check, extract_cycles,
                  run_simulation, run_table_policy, simulate_trajectory,
                  write_trajectory_csv)

__version__ = "0.1.0"

__all__ = [
    "AgeCap", "AoiBreakdown", "ChainStructureError", "ConvergenceError",
    "CycleRecord", "FiniteMdp", "KernelCheckReport", "MdpInvariantError",
    "PolicySpec", "ServiceRates", "SimResult", "Solution", "SolveConfig",
    "State1P", "State2P", "SystemConfig", "Trajectory", "WaitThreshold",
    "admissible_actions_1p", "admissible_actions_2p", "aoi_wait1", "aoi_zw1",
    "aoi_zw2", "average_aoi_from_cycles", "beta_max", "build_finite_mdp",
    "build_mdp_1p", "build_mdp_2p", "cap_value", "clamp_age",
    "empirical_kernel_check", "enumerate_states_1p", "enumerate_states_2p",
    "evaluate_policy_exact", "expected_cost_1p", "expected_cost_2p",
    "expected_x_given_busy", "extract_cycles", "family_of", "mean_wait",
    "n_states_1p", "n_states_2p", "optimal_beta", "p_busy", "run_simulation",
    "run_table_policy", "sample_geometric", "simulate_trajectory",
    "solve_rvi", "state_index_1p", "state_index_2p", "sweep_grid",
    "transitions_1p", "transitions_2p", "waiting_beneficial",
    "write_kernel_csv", "write_solution_csv", "write_trajectory_csv",
    "zw2_beats_zw1",
]
