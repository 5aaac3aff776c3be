"""Joint base-station association and MIMO transmit covariance optimization.

Users of an uplink heterogeneous network play a pricing game: each user
picks a serving BS and a transmit covariance to maximize its own utility
minus the interference prices charged by the BSs. Best responses are
computed by whitening, an SVD and water-filling; the system utility never
decreases along the dynamics.
"""

from .best_response import (
    BestResponse,
    InnerProblem,
    diagonalize,
    select_best_bs,
    solve_c_star,
    solve_inner_covariance,
    solve_user_covariance,
    water_levels,
)
from .errors import HetNetError
from .game import GameResult, GameTrace, NEReport, init_state, kkt_residual, run, step, verify_ne
from .gadget import ThreeSatInstance, brute_force_max_sum_rate, build_network, check_reduction, two_user_frontier_check
from .network import ChannelSet, ScenarioConfig, Topology, candidate_bs, generate_channels, generate_topology, load_config
from .pricing import all_prices, price_matrix
from .rates import NetworkState, all_rates, sum_utility, user_rate
from .utility import UtilitySpec

__version__ = "0.1.0"

__all__ = [
    "BestResponse",
    "ChannelSet",
    "GameResult",
    "GameTrace",
    "HetNetError",
    "InnerProblem",
    "NEReport",
    "NetworkState",
    "ScenarioConfig",
    "ThreeSatInstance",
    "Topology",
    "UtilitySpec",
    "all_prices",
    "all_rates",
    "brute_force_max_sum_rate",
    "build_network",
    "candidate_bs",
    "check_reduction",
    "diagonalize",
    "generate_channels",
    "generate_topology",
    "init_state",
    "kkt_residual",
    "load_config",
    "price_matrix",
    "run",
    "select_best_bs",
    "solve_c_star",
    "solve_inner_covariance",
    "solve_user_covariance",
    "step",
    "sum_utility",
    "two_user_frontier_check",
    "user_rate",
    "verify_ne",
    "water_levels",
]
