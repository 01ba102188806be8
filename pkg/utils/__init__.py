"""
Utility functions for the incentive lab
"""
from .helpers import (
    format_scientific,
    relative_deviation,
    format_duration,
    print_banner,
    format_table
)
from .statistics import mean_and_stderr, paired_comparison, GainAnalyzer

__all__ = [
    'format_scientific',
    'relative_deviation',
    'format_duration',
    'print_banner',
    'format_table',
    'mean_and_stderr',
    'paired_comparison',
    'GainAnalyzer'
]
