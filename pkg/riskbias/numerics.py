"""Compensated summation and monotone root finding."""

import logging
import math
from typing import Callable, Iterable

import numpy as np
from scipy import optimize

from .errors import InternalError

logger = logging.getLogger(__name__)

# Absolute tolerance on the solved argument (probabilities, occupancies).
BISECTION_XTOL = 1e-12
BISECTION_MAXITER = 200


def compensated_sum(values: Iterable[float]) -> float:
    """Exactly rounded sum (Shewchuk) of a float sequence."""
    if isinstance(values, np.ndarray):
        return math.fsum(values.ravel().tolist())
    return math.fsum(values)


def compensated_dot(weights: np.ndarray, values: np.ndarray) -> float:
    """Compensated sum of the elementwise product."""
    return math.fsum((np.asarray(weights, dtype=float) * np.asarray(values, dtype=float)).tolist())


def solve_increasing(
    func: Callable[[float], float],
    target: float,
    lower: float,
    upper: float,
    xtol: float = BISECTION_XTOL,
) -> float:
    """
    Solve func(x) = target for a nondecreasing func on [lower, upper].

    Targets at or beyond the ends of the bracket return the end point; callers
    are expected to have checked the domain already.

    Raises:
        InternalError: if the bracket does not contain a sign change or the
            bisection does not converge.
    """
    f_lower = func(lower) - target
    if f_lower >= 0.0:
        return lower
    f_upper = func(upper) - target
    if f_upper <= 0.0:
        return upper

    try:
        root = optimize.bisect(
            lambda x: func(x) - target,
            lower,
            upper,
            xtol=xtol,
            maxiter=BISECTION_MAXITER,
        )
    except (ValueError, RuntimeError) as e:
        raise InternalError(
            f"bisection failed on [{lower}, {upper}] for target {target}: {e}"
        ) from e
    return float(root)


def grow_bracket(
    func: Callable[[float], float],
    target: float,
    lower: float,
    upper: float,
    factor: float = 2.0,
    max_steps: int = 200,
) -> tuple[float, float]:
    """
    Grow [lower, upper] geometrically until func(upper) >= target.

    func must be nondecreasing and unbounded above.
    """
    for _ in range(max_steps):
        if func(upper) >= target:
            return lower, upper
        lower, upper = upper, upper * factor
    raise InternalError(f"no bracket found for target {target} below {upper}")
