"""
Empirical one-sided confidence bounds for the true risk.

An estimating function maps an observed functional u (empirical risk or
leave-one-out) to an upper bound on the true risk. It is fit on simulated
(u, R) pairs from a family of distributions so that, for every member,
Prob(R <= fn(u)) >= eta.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientRunsError
from .models import CoverageReport, EstimatingFunction, MemberCoverage, ModelFamily
from .simulation import STREAM_FIT, STREAM_VALIDATE, tree_runs

logger = logging.getLogger(__name__)

DEFAULT_BINS = 50
DEFAULT_LEVELS = 200
MIN_RUNS_PER_MEMBER = 10
MIN_REPS = 100
# Binomial standard errors added to eta in the in-sample fit target.
DEFAULT_GUARD = 2.0


class Functional(str, enum.Enum):
    EMPIRICAL_RISK = "empirical_risk"
    LOO = "loo"


@dataclass(frozen=True)
class MemberPairs:
    """Simulated (u, R) pairs of one family member."""

    param: float
    label: str
    u: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.r.shape or self.u.ndim != 1:
            raise ValueError(f"{self.label}: u and r must be 1-d arrays of equal length")

    @property
    def runs(self) -> int:
        return self.u.size


def simulate_pairs(
    family: ModelFamily,
    N: int,
    max_leaves: int,
    reps: int,
    functional: Functional,
    seed: int,
    threads: int = 1,
    stream: int = STREAM_FIT,
) -> list[MemberPairs]:
    """For every member, reps train runs recording (u, true risk of the trained tree)."""
    if reps < MIN_REPS:
        raise ValueError(f"reps must be >= {MIN_REPS}, got {reps}")
    functional = Functional(functional)
    with_loo = functional is Functional.LOO

    pairs = []
    for member in family.members():
        runs = tree_runs(member, N, max_leaves, reps, seed, threads, with_loo=with_loo, stream=stream)
        u = np.array([run.loo if with_loo else run.empirical_risk for run in runs])
        r = np.array([run.true_risk for run in runs])
        pairs.append(MemberPairs(param=member.param, label=member.label, u=u, r=r))
        logger.debug(f"{member.label}: mean u={u.mean():.6f} mean R={r.mean():.6f}")
    return pairs


# ============================================================================
# Fitting
# ============================================================================

def required_runs(eta: float, runs: int, guard: float = DEFAULT_GUARD) -> int:
    """
    In-sample runs a member must cover.

    ceil(runs * (eta + guard * se)) with se = sqrt(eta (1 - eta) / runs), capped at runs.
    """
    target = eta + guard * math.sqrt(eta * (1.0 - eta) / runs)
    return min(runs, math.ceil(runs * target - 1e-9))


def _bin_edges(pairs: Sequence[MemberPairs], n_bins: int) -> np.ndarray:
    all_u = np.concatenate([p.u for p in pairs])
    lo, hi = float(all_u.min()), float(all_u.max())
    if hi <= lo:
        return np.array([lo, lo])
    return np.linspace(lo, hi, n_bins + 1)


def _bin_index(u: np.ndarray, breakpoints: np.ndarray) -> np.ndarray:
    # same rule as EstimatingFunction.__call__
    idx = np.searchsorted(breakpoints, u, side='right') - 1
    return np.clip(idx, 0, breakpoints.size - 1)


def _coverage_table(pairs: Sequence[MemberPairs], breakpoints: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """table[b, l, i] = runs of member i in bin b with R <= levels[l]."""
    table = np.zeros((breakpoints.size, levels.size, len(pairs)), dtype=np.int64)
    for i, member in enumerate(pairs):
        bins = _bin_index(member.u, breakpoints)
        covered = member.r[:, None] <= levels[None, :]
        np.add.at(table[:, :, i], bins, covered.astype(np.int64))
    return table


def build_estimating_function(
    pairs: Sequence[MemberPairs],
    eta: float,
    n_bins: int = DEFAULT_BINS,
    n_levels: int = DEFAULT_LEVELS,
    min_runs: int = MIN_RUNS_PER_MEMBER,
    guard: float = DEFAULT_GUARD,
) -> EstimatingFunction:
    """
    Lowest monotone step function on a u-bin grid covering every member with probability eta.

    All bins start at the largest observed risk. Each step lowers one bin by
    one level (pulling earlier bins down with it to stay monotone); the move
    with the largest total reduction whose result keeps every member's
    in-sample coverage at or above required_runs(eta, runs, guard) is taken.
    Stops when no move is feasible. With guard = 0 the target is eta itself,
    which the greedy search overfits: coverage on fresh runs then falls short.

    Raises:
        ValueError: if eta is not in (0, 1), guard < 0 or no data is given.
        InsufficientRunsError: if a member has fewer than min_runs runs.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if guard < 0.0:
        raise ValueError(f"guard must be >= 0, got {guard}")
    if not pairs:
        raise ValueError("no simulation data to fit")
    for member in pairs:
        if member.runs < min_runs:
            raise InsufficientRunsError(member.label, member.runs, min_runs)

    breakpoints = _bin_edges(pairs, n_bins)[:-1]
    r_max = float(max(member.r.max() for member in pairs))
    levels = np.linspace(0.0, r_max, n_levels + 1) if r_max > 0.0 else np.zeros(1)
    table = _coverage_table(pairs, breakpoints, levels)
    needed = np.array([required_runs(eta, member.runs, guard) for member in pairs])

    n = breakpoints.size
    bins = np.arange(n)
    current = np.full(n, levels.size - 1, dtype=np.int64)
    steps = 0
    while True:
        lowerable = current > 0
        if not lowerable.any():
            break
        # candidate[b] = current with bin b lowered one level and bins before it capped to match
        target = current - 1
        candidates = np.where(bins[None, :] <= bins[:, None], np.minimum(current[None, :], target[:, None]), current[None, :])
        coverage = table[bins[None, :], candidates].sum(axis=1)
        feasible = lowerable & np.all(coverage >= needed[None, :], axis=1)
        if not feasible.any():
            break
        reduction = (levels[current][None, :] - levels[candidates]).sum(axis=1)
        reduction = np.where(feasible, reduction, -np.inf)
        current = candidates[int(np.argmax(reduction))]
        steps += 1

    logger.info(f"Estimating function fit: {n} bins, {levels.size} levels, {steps} lowering steps")
    return EstimatingFunction(
        breakpoints=tuple(float(b) for b in breakpoints),
        values=tuple(float(v) for v in levels[current]),
    )


# ============================================================================
# Coverage
# ============================================================================

def coverage_check(fn: EstimatingFunction, pairs: Sequence[MemberPairs]) -> CoverageReport:
    """Fraction of runs with R <= fn(u), per member, with binomial standard errors."""
    members = []
    for member in pairs:
        covered = member.r <= np.asarray(fn(member.u))
        c = float(covered.mean())
        members.append(MemberCoverage(
            param=member.param, coverage=c, reps=member.runs,
            se=math.sqrt(c * (1.0 - c) / member.runs),
        ))
    return CoverageReport(members=members)


def validate_coverage(
    fn: EstimatingFunction,
    family: ModelFamily,
    N: int,
    max_leaves: int,
    reps: int,
    functional: Functional,
    seed: int,
    threads: int = 1,
) -> CoverageReport:
    """Coverage on a fresh re-simulation drawn from the validation stream."""
    pairs = simulate_pairs(family, N, max_leaves, reps, functional, seed, threads, stream=STREAM_VALIDATE)
    report = coverage_check(fn, pairs)
    logger.info(f"Validation coverage: min {report.min_coverage:.4f} over {len(report.members)} members")
    return report
