"""Co-action minority game: optimal jump probabilities, payoffs and strategy switches."""

from camg.core import (
    GameConfig,
    StrategyProfile,
    canonicalize,
    flip_pair,
    make_config,
    uniform_profile,
)
from camg.markov import (
    block_diagonalize,
    build_full_matrix,
    build_transition_matrix,
    eigen3_analytic,
    marginalize_to_agent,
    steady_state,
)
from camg.payoff import (
    average_payoff,
    discounted_payoffs,
    inefficiency,
    payoff_report,
    w_rand,
)
from camg.equilibrium import (
    best_response,
    best_response_curves,
    cubic_root_n3,
    landmarks,
    nash_trap_diagnostic,
    solve_coaction,
    sweep,
    threshold_scan,
)
from camg.large_n import b_max, eigen_triple, solve_a_star
from camg.simulate import simulate

__version__ = "0.1.0"

__all__ = [
    "GameConfig",
    "StrategyProfile",
    "average_payoff",
    "b_max",
    "best_response",
    "best_response_curves",
    "block_diagonalize",
    "build_full_matrix",
    "build_transition_matrix",
    "canonicalize",
    "cubic_root_n3",
    "discounted_payoffs",
    "eigen3_analytic",
    "eigen_triple",
    "flip_pair",
    "inefficiency",
    "landmarks",
    "make_config",
    "marginalize_to_agent",
    "nash_trap_diagnostic",
    "payoff_report",
    "simulate",
    "solve_a_star",
    "solve_coaction",
    "steady_state",
    "sweep",
    "threshold_scan",
    "uniform_profile",
    "w_rand",
]
