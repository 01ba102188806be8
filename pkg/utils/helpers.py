"""
Utility functions for the incentive lab
Includes formatting for reports and console banners
"""
import logging
import math
from typing import Iterable, List

logger = logging.getLogger(__name__)


# ============================================================================
# Formatting Utilities
# ============================================================================

def format_scientific(value: float, digits: int = 3) -> str:
    """
    Format a number in scientific notation

    Args:
        value: Number to format
        digits: Significant digits

    Returns:
        Formatted string like "1.90e-03"

    Example:
        >>> format_scientific(0.0019, 3)
        '1.90e-03'
    """
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    return f"{value:.{max(digits - 1, 0)}e}"


def relative_deviation(computed: float, reference: float) -> float:
    """
    Relative deviation (computed - reference) / |reference|

    Returns:
        inf when the reference is 0 and the values differ, 0 when both are 0
    """
    if reference == 0:
        return 0.0 if computed == 0 else math.inf
    return (computed - reference) / abs(reference)


def format_duration(seconds: float) -> str:
    """Format a wall-clock duration like "2m 05.3s" or "12.4s"."""
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, rest = divmod(seconds, 60)
    return f"{int(minutes)}m {rest:04.1f}s"


# ============================================================================
# Console Output
# ============================================================================

def banner(title: str, width: int = 60) -> List[str]:
    """Lines of a console banner around title."""
    return ["=" * width, title, "=" * width]


def print_banner(title: str, width: int = 60):
    for line in banner(title, width):
        print(line)


def format_table(rows: Iterable[Iterable[str]], header: Iterable[str]) -> List[str]:
    """Left-aligned fixed-width text table."""
    rows = [list(map(str, row)) for row in rows]
    header = list(map(str, header))
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return lines
