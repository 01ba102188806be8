"""
Input validation utilities for the incentives laboratory
"""
import math
from typing import Tuple, Optional

import numpy as np


def validate_finite(name: str, value) -> Tuple[bool, Optional[str]]:
    """
    Validate that a value is a finite real number

    Args:
        name: Field name used in the error message
        value: Value to check

    Returns:
        Tuple of (is_valid, error_message)
    """
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False, f"{name} must be a number, got {value!r}"

    if not math.isfinite(value):
        return False, f"{name} must be finite, got {value}"

    return True, None


def validate_positive(name: str, value: float) -> Tuple[bool, Optional[str]]:
    """
    Validate that a value is strictly positive

    Args:
        name: Field name used in the error message
        value: Value to check

    Returns:
        Tuple of (is_valid, error_message)
    """
    ok, error = validate_finite(name, value)
    if not ok:
        return ok, error

    if value <= 0:
        return False, f"{name} must be > 0 (got {value})"

    return True, None


def validate_nonnegative(name: str, value: float) -> Tuple[bool, Optional[str]]:
    """
    Validate that a value is greater than or equal to zero

    Args:
        name: Field name used in the error message
        value: Value to check

    Returns:
        Tuple of (is_valid, error_message)
    """
    ok, error = validate_finite(name, value)
    if not ok:
        return ok, error

    if value < 0:
        return False, f"{name} must be ≥ 0 (got {value})"

    return True, None


def validate_nonpositive(name: str, value: float) -> Tuple[bool, Optional[str]]:
    """
    Validate that a value is less than or equal to zero

    Args:
        name: Field name used in the error message
        value: Value to check

    Returns:
        Tuple of (is_valid, error_message)
    """
    ok, error = validate_finite(name, value)
    if not ok:
        return ok, error

    if value > 0:
        return False, f"{name} must be ≤ 0 (got {value})"

    return True, None


def validate_open_interval(name: str, value: float, low: float, high: float) -> Tuple[bool, Optional[str]]:
    """
    Validate that low < value < high

    Args:
        name: Field name used in the error message
        value: Value to check
        low: Excluded lower end
        high: Excluded upper end

    Returns:
        Tuple of (is_valid, error_message)
    """
    ok, error = validate_finite(name, value)
    if not ok:
        return ok, error

    if not (low < value < high):
        return False, f"{name} must lie in ({low:g},{high:g}) (got {value})"

    return True, None


def validate_closed_interval(name: str, value: float, low: float, high: float) -> Tuple[bool, Optional[str]]:
    """
    Validate that low <= value <= high

    Args:
        name: Field name used in the error message
        value: Value to check
        low: Included lower end
        high: Included upper end

    Returns:
        Tuple of (is_valid, error_message)
    """
    ok, error = validate_finite(name, value)
    if not ok:
        return ok, error

    if not (low <= value <= high):
        return False, f"{name} must lie in [{low:g},{high:g}] (got {value})"

    return True, None


def validate_divides(name: str, step: float, span: float, rel_tol: float = 1e-9) -> Tuple[bool, Optional[str]]:
    """
    Validate that a step divides a span into an integer number of cells

    Args:
        name: Step name used in the error message
        step: Grid step
        span: Length to be covered
        rel_tol: Relative tolerance on the cell count

    Returns:
        Tuple of (is_valid, error_message)
    """
    ok, error = validate_positive(name, step)
    if not ok:
        return ok, error

    cells = span / step
    if abs(cells - round(cells)) > rel_tol * max(1.0, cells) or round(cells) < 1:
        return False, f"{name}={step:g} does not divide {span:g} into whole cells"

    return True, None


def validate_distances(name: str, x, L: Optional[float] = None) -> Tuple[bool, Optional[str]]:
    """
    Validate distances from the mid-price: nonnegative, and inside (0, L) when L is given

    Args:
        name: Field name used in the error message
        x: Distance or array of distances
        L: Optional domain width

    Returns:
        Tuple of (is_valid, error_message)
    """
    values = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(values)):
        return False, f"{name} must be finite"

    if L is None:
        if np.any(values < 0):
            return False, f"{name} must be ≥ 0 (got min {float(np.min(values))})"
    elif np.any(values <= 0) or np.any(values >= L):
        return False, f"{name} must lie in (0, {L:g}) (got range [{float(np.min(values))}, {float(np.max(values))}])"

    return True, None
