"""
Models module for the book dynamics, value function and optimal incentives
"""

from .params import ModelBundle, baseline_bundle, load_params, apply_overrides
from .value import solve_value_pde, stationary_coefficients, feynman_kac_estimate
from .incentives import incentive_schedule, per_limit_incentive_table, StationarySchedule, GridSchedule
from .simulator import BookSimulator, BookState, ensemble_average, estimate_objective, simulate_book

__all__ = [
    'ModelBundle',
    'baseline_bundle',
    'load_params',
    'apply_overrides',
    'solve_value_pde',
    'stationary_coefficients',
    'feynman_kac_estimate',
    'incentive_schedule',
    'per_limit_incentive_table',
    'StationarySchedule',
    'GridSchedule',
    'BookSimulator',
    'BookState',
    'ensemble_average',
    'estimate_objective',
    'simulate_book',
]
