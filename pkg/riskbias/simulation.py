"""
Monte Carlo engine for the histogram classifier and greedy trees.

Every replicate draws from its own Philox stream keyed by
(seed, stream, family, member, replicate), so results do not depend on the
order in which replicates run or on the number of worker threads.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, TypeVar, Union

import numpy as np
from tqdm import tqdm

from .decision_tree import LabeledSample, tree_empirical_risk, tree_loo, tree_true_risk, train_tree
from .models import (
    BiasCurve,
    ContinuousModel,
    FamilyMember,
    HistogramDistribution,
    ModelFamily,
    ProblemSize,
    RiskReport,
    RiskSummary,
    SampleCounts,
    SimulatedBiasPoint,
)
from .numerics import compensated_sum

logger = logging.getLogger(__name__)

T = TypeVar("T")
Seed = Union[int, np.random.Generator]

# Independent streams: fitting runs and fresh-seed validation runs.
STREAM_FIT = 0
STREAM_VALIDATE = 1


def replicate_rng(
    seed: int,
    member: int = 0,
    replicate: int = 0,
    stream: int = STREAM_FIT,
    family: int = 0,
) -> np.random.Generator:
    """Counter-based generator private to one (stream, family, member, replicate) key."""
    sequence = np.random.SeedSequence(seed, spawn_key=(stream, family, member, replicate))
    return np.random.Generator(np.random.Philox(sequence))


def _as_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return replicate_rng(int(seed))


def run_replicates(
    func: Callable[[int], T],
    reps: int,
    threads: int = 1,
    desc: Optional[str] = None,
) -> list[T]:
    """Evaluate func(0), ..., func(reps - 1), in replicate order, on up to `threads` workers."""
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    show = desc is not None and logger.isEnabledFor(logging.INFO)
    if threads <= 1:
        return [func(r) for r in tqdm(range(reps), desc=desc, disable=not show, leave=False)]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(tqdm(executor.map(func, range(reps)), total=reps, desc=desc, disable=not show, leave=False))


# ============================================================================
# Histogram classifier
# ============================================================================

def sample_histogram(dist: HistogramDistribution, size: ProblemSize, seed: Seed) -> SampleCounts:
    """Draw N points: cell ~ categorical(alpha), label ~ Bernoulli(p_cell); return per-cell counts."""
    if dist.k != size.k:
        raise ValueError(f"distribution has {dist.k} cells, problem size says k={size.k}")
    rng = _as_rng(seed)
    alphas = dist.alphas
    n = rng.multinomial(size.N, alphas / alphas.sum())
    m = rng.binomial(n, dist.ps)
    return SampleCounts.from_arrays(m, n)


def train_histogram(counts: SampleCounts, seed: Seed) -> np.ndarray:
    """Majority label per cell; ties (empty cells included) are settled by a fair coin."""
    rng = _as_rng(seed)
    m, zeros = counts.m, counts.n - counts.m
    labels = (m > zeros).astype(np.int64)
    ties = m == zeros
    if ties.any():
        labels[ties] = rng.integers(0, 2, size=int(ties.sum()))
    return labels


def true_risk_histogram(dist: HistogramDistribution, labels: Sequence[int]) -> float:
    labels = np.asarray(labels)
    if labels.shape != (dist.k,):
        raise ValueError(f"expected {dist.k} labels, got shape {labels.shape}")
    ps = dist.ps
    return compensated_sum(dist.alphas * np.where(labels == 0, ps, 1.0 - ps))


def empirical_risk_histogram(counts: SampleCounts) -> float:
    """Training error of the majority rule; identical for every tie outcome."""
    m, n = counts.m, counts.n
    return float(np.minimum(m, n - m).sum()) / counts.N


def _tie_loss(agreeing: np.ndarray, disagreeing: np.ndarray) -> np.ndarray:
    """Loss of a held-out point given the counts agreeing / disagreeing with it."""
    return np.where(
        agreeing > disagreeing, 0.0,
        np.where(agreeing < disagreeing, 1.0, 0.5),
    )


def loo_histogram(counts: SampleCounts) -> float:
    """
    Exact leave-one-out error of the histogram classifier.

    A held-out class-1 point meets the reduced cell (m-1, n-1), a held-out
    class-0 point meets (m, n-1); ties in the reduced cell cost 0.5.
    """
    N = counts.N
    if N < 2:
        raise ValueError(f"leave-one-out needs N >= 2, got N={N}")
    m = counts.m.astype(float)
    zeros = counts.n.astype(float) - m
    loss_ones = _tie_loss(m - 1.0, zeros)
    loss_zeros = _tie_loss(zeros - 1.0, m)
    return compensated_sum(m * loss_ones + zeros * loss_zeros) / N


@dataclass(frozen=True)
class HistogramRun:
    empirical_risk: float
    true_risk: float
    loo: Optional[float]


def simulate_histogram(
    dist: HistogramDistribution,
    size: ProblemSize,
    reps: int,
    seed: int,
    threads: int = 1,
    member: int = 0,
) -> RiskReport:
    """Replicate sample/train/evaluate runs and summarize them; bias is the paired difference."""

    def one_run(replicate: int) -> HistogramRun:
        rng = replicate_rng(seed, member, replicate)
        counts = sample_histogram(dist, size, rng)
        labels = train_histogram(counts, rng)
        return HistogramRun(
            empirical_risk=empirical_risk_histogram(counts),
            true_risk=true_risk_histogram(dist, labels),
            loo=loo_histogram(counts) if size.N >= 2 else None,
        )

    runs = run_replicates(one_run, reps, threads, desc="histogram")
    empirical = np.array([run.empirical_risk for run in runs])
    true = np.array([run.true_risk for run in runs])
    report = RiskReport(
        empirical_risk=RiskSummary.from_values(empirical),
        loo_estimate=RiskSummary.from_values([run.loo for run in runs]) if size.N >= 2 else None,
        true_risk=RiskSummary.from_values(true),
        bias=RiskSummary.from_values(true - empirical),
    )
    logger.debug(
        f"histogram N={size.N} k={size.k} reps={reps}: "
        f"E={report.empirical_risk.mean:.6f} R={report.true_risk.mean:.6f}"
    )
    return report


# ============================================================================
# Continuous models and trees
# ============================================================================

def sample_continuous(model: ContinuousModel, N: int, seed: Seed) -> LabeledSample:
    """x uniform on the cube; y ~ Bernoulli(g1) inside [0, delta)^dim, Bernoulli(g2) elsewhere."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    rng = _as_rng(seed)
    x = rng.random((N, model.dim))
    inside = np.all(x < model.delta, axis=1)
    g = np.where(inside, model.g1, model.g2)
    y = (rng.random(N) < g).astype(np.int64)
    return LabeledSample(x=x, y=y)


@dataclass(frozen=True)
class TreeRun:
    """One train run: empirical risk, exact true risk and optionally leave-one-out."""

    empirical_risk: float
    true_risk: float
    loo: Optional[float] = None


def tree_runs(
    member: FamilyMember,
    N: int,
    max_leaves: int,
    reps: int,
    seed: int,
    threads: int = 1,
    with_loo: bool = False,
    stream: int = STREAM_FIT,
) -> list[TreeRun]:
    """reps independent sample/train runs of a tree on one family member."""

    def one_run(replicate: int) -> TreeRun:
        rng = replicate_rng(seed, member.index, replicate, stream, family=member.family)
        sample = sample_continuous(member.model, N, rng)
        tree = train_tree(sample, max_leaves)
        return TreeRun(
            empirical_risk=tree_empirical_risk(tree, sample),
            true_risk=tree_true_risk(member.model, tree),
            loo=tree_loo(sample, max_leaves) if with_loo else None,
        )

    return run_replicates(one_run, reps, threads, desc=member.label)


def mc_bias_curve(
    family: ModelFamily,
    N: int,
    max_leaves: int,
    reps: int,
    seed: int,
    threads: int = 1,
) -> BiasCurve:
    """Mean empirical risk and mean bias of trained trees for every family member."""
    members = family.members()
    logger.info(f"Simulating family {family.variant}: {len(members)} members, N={N}, reps={reps}")

    points = []
    for member in members:
        runs = tree_runs(member, N, max_leaves, reps, seed, threads)
        empirical = np.array([run.empirical_risk for run in runs])
        true = np.array([run.true_risk for run in runs])
        e = RiskSummary.from_values(empirical)
        r = RiskSummary.from_values(true)
        s = RiskSummary.from_values(true - empirical)
        points.append(SimulatedBiasPoint(
            empirical_risk=e.mean, bias=r.mean - e.mean,
            param_name=member.param_name, param=member.param,
            se_empirical=e.se, se_risk=r.se, se_bias=s.se, reps=reps,
        ))
        logger.debug(f"{member.label}: E={e.mean:.6f} R={r.mean:.6f} bias={r.mean - e.mean:.6f}")

    return BiasCurve(label=f"family {family.variant}", points=points)
