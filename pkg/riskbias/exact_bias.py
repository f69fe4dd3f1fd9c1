"""
Exact finite-sample risk, empirical risk and bias of the histogram classifier.

Both risks are additive over cells, so every expectation reduces to a double
sum over the cell occupancy n ~ B(N, alpha) and the class-1 count
m ~ B(n, p). The per-cell kernels are

    nu_tilde(m, n) = min(m, n - m)                (training errors in the cell)
    nu(m, n, p)    = 1-p | p | 0.5                (error rate of the majority label)

and the cell functions are r_tilde = nu_tilde / N, r = alpha * nu, s = r - r_tilde.
"""

import enum
import logging
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, InternalError
from .models import BiasCurve, BiasPoint, CellParams, HistogramDistribution, ProblemSize
from .numerics import compensated_dot, compensated_sum, solve_increasing

logger = logging.getLogger(__name__)

# Upper bound on the number of pmf entries materialised per chunk of rows.
_CHUNK_ELEMENTS = 1 << 22
# Slack when checking a requested empirical risk against the attainable range.
_RANGE_SLACK = 1e-12
# Default z-grid size of the envelope and (alpha, p) grid of the cross-check.
ENVELOPE_POINTS = 1000
GRID_SEARCH_POINTS = 500
# Cached entries hold arrays of length N + 1.
KERNEL_CACHE_SIZE = 128


class Kernel(str, enum.Enum):
    """Per-cell loss kernels averaged over the class-1 count."""

    NU_TILDE = "nu_tilde"
    NU = "nu"


class CellFunction(str, enum.Enum):
    """Additive cell functions: empirical risk, risk and their difference."""

    EMPIRICAL_RISK = "r_tilde"
    RISK = "r"
    BIAS = "s"


# ============================================================================
# Elementary functions
# ============================================================================

def binom_pmf(m: int, n: int, p: float) -> float:
    """
    Binomial probability C(n, m) p^m (1-p)^(n-m).

    Raises:
        ValueError: if m is not in [0, n] or p is not in [0, 1].
    """
    if n < 0 or not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p == 0.0:
        return 1.0 if m == 0 else 0.0
    if p == 1.0:
        return 1.0 if m == n else 0.0
    return float(stats.binom.pmf(m, n, p))


def nu(m: int, n: int, p: float) -> float:
    """Misclassification rate in a cell holding m class-1 points out of n.

    Ties (including the empty cell) use the mean of the randomised label, 0.5.
    """
    if n < 0 or not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    if m > n - m:
        return 1.0 - p
    if m < n - m:
        return p
    return 0.5


def nu_tilde(m: int, n: int) -> int:
    """Training errors of the majority label in a cell: min(m, n - m)."""
    if n < 0 or not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    return min(m, n - m)


def _pmf_rows(n: np.ndarray, m: np.ndarray, p: float) -> np.ndarray:
    """Matrix B(m, n, p) for rows n and columns m; zero where m > n."""
    if p == 0.0:
        return ((m == 0) & (n >= 0)).astype(float)
    if p == 1.0:
        return (m == n).astype(float)
    return stats.binom.pmf(m, n, p)


@lru_cache(maxsize=KERNEL_CACHE_SIZE)
def kernel_table(n_max: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Averages of both kernels over m ~ B(n, p) for n = 0..n_max.

    Returns:
        (pi_nu_tilde, pi_nu), each of length n_max + 1 and read-only.
    """
    pi_nu_tilde = np.zeros(n_max + 1)
    pi_nu = np.zeros(n_max + 1)
    m_all = np.arange(n_max + 1)[None, :]
    rows_per_chunk = max(1, _CHUNK_ELEMENTS // (n_max + 1))

    for start in range(0, n_max + 1, rows_per_chunk):
        n_rows = np.arange(start, min(start + rows_per_chunk, n_max + 1))[:, None]
        pmf = np.asarray(_pmf_rows(n_rows, m_all, p), dtype=float)
        complement = n_rows - m_all
        errors = np.minimum(m_all, complement)
        rates = np.where(m_all > complement, 1.0 - p, np.where(m_all < complement, p, 0.5))
        for i, n in enumerate(n_rows[:, 0]):
            pi_nu_tilde[n] = compensated_dot(pmf[i, :n + 1], errors[i, :n + 1])
            pi_nu[n] = compensated_dot(pmf[i, :n + 1], rates[i, :n + 1])

    pi_nu_tilde.setflags(write=False)
    pi_nu.setflags(write=False)
    return pi_nu_tilde, pi_nu


@lru_cache(maxsize=KERNEL_CACHE_SIZE)
def occupancy_weights(N: int, alpha: float) -> np.ndarray:
    """B(n, N, alpha) for n = 0..N (read-only)."""
    n = np.arange(N + 1)
    if alpha == 0.0:
        weights = (n == 0) * 1.0
    elif alpha == 1.0:
        weights = (n == N) * 1.0
    else:
        weights = stats.binom.pmf(n, N, alpha)
    weights = np.asarray(weights, dtype=float)
    weights.setflags(write=False)
    return weights


def binomial_kernel_expectation(alpha: float, N: int, p: float, kernel: Kernel) -> float:
    """Sum over n of B(n, N, alpha) * pi_kernel(n, p), without the 1/N or alpha scaling."""
    pi_nu_tilde, pi_nu = kernel_table(N, float(p))
    table = pi_nu_tilde if Kernel(kernel) is Kernel.NU_TILDE else pi_nu
    return compensated_dot(occupancy_weights(N, float(alpha)), table)


def _cell_mu(alpha: float, p: float, N: int, phi: CellFunction) -> float:
    if phi is CellFunction.EMPIRICAL_RISK:
        return binomial_kernel_expectation(alpha, N, p, Kernel.NU_TILDE) / N
    risk = alpha * binomial_kernel_expectation(alpha, N, p, Kernel.NU)
    if phi is CellFunction.RISK:
        return risk
    return risk - binomial_kernel_expectation(alpha, N, p, Kernel.NU_TILDE) / N


def cell_expectation(cell: CellParams, size: ProblemSize, phi: CellFunction) -> float:
    """Exact expectation of a cell function for one cell (no sampling)."""
    return _cell_mu(cell.alpha, cell.p, size.N, CellFunction(phi))


# ============================================================================
# Distribution-level expectations
# ============================================================================

def _check_cells(dist: HistogramDistribution, size: ProblemSize) -> None:
    if dist.k != size.k:
        raise ValueError(f"distribution has {dist.k} cells, problem size says k={size.k}")


def expected_empirical_risk(dist: HistogramDistribution, size: ProblemSize) -> float:
    """E of the training error of the per-cell majority rule."""
    _check_cells(dist, size)
    return compensated_sum(
        cell_expectation(cell, size, CellFunction.EMPIRICAL_RISK) for cell in dist.cells
    )


def expected_risk(dist: HistogramDistribution, size: ProblemSize) -> float:
    """E of the misclassification probability of the trained rule."""
    _check_cells(dist, size)
    return compensated_sum(cell_expectation(cell, size, CellFunction.RISK) for cell in dist.cells)


def bias(dist: HistogramDistribution, size: ProblemSize) -> BiasPoint:
    """Expected empirical risk and the bias of the resubstitution estimate."""
    empirical = expected_empirical_risk(dist, size)
    return BiasPoint(empirical_risk=empirical, bias=expected_risk(dist, size) - empirical)


# ============================================================================
# Envelope
# ============================================================================

def _scaled_cell(alpha: float, p: float, size: ProblemSize) -> tuple[float, float]:
    """(k * mu_r_tilde, k * mu_s) for one cell."""
    empirical = binomial_kernel_expectation(alpha, size.N, p, Kernel.NU_TILDE) / size.N
    risk = alpha * binomial_kernel_expectation(alpha, size.N, p, Kernel.NU)
    return size.k * empirical, size.k * (risk - empirical)


def envelope_join_point(size: ProblemSize) -> float:
    """k * mu_r_tilde at alpha = 1/N, p = 1/2, where the two sweep branches meet."""
    return _scaled_cell(1.0 / size.N, 0.5, size)[0]


def envelope_range(size: ProblemSize) -> tuple[float, float]:
    """Interval of per-cell z = k * mu_r_tilde covered by the sweep."""
    return 0.0, _scaled_cell(1.0 / size.k, 0.5, size)[0]


def envelope_value(z: float, size: ProblemSize) -> float:
    """
    zeta(z): largest k * mu_s over cells with k * mu_r_tilde = z.

    The maximiser runs along alpha = 1/N with p rising from 0 to 1/2, then along
    p = 1/2 with alpha rising from 1/N to 1/k.

    Raises:
        DomainError: if z lies outside the range covered by the sweep.
    """
    lower, upper = envelope_range(size)
    if not lower - _RANGE_SLACK <= z <= upper + _RANGE_SLACK:
        raise DomainError(f"z={z} is not attainable by a cell", lower, upper)

    alpha_min, alpha_max = 1.0 / size.N, 1.0 / size.k
    if z <= envelope_join_point(size):
        p = solve_increasing(lambda q: _scaled_cell(alpha_min, q, size)[0], z, 0.0, 0.5)
        return _scaled_cell(alpha_min, p, size)[1]
    alpha = solve_increasing(lambda a: _scaled_cell(a, 0.5, size)[0], z, alpha_min, alpha_max)
    return _scaled_cell(alpha, 0.5, size)[1]


def default_z_grid(size: ProblemSize, points: int = ENVELOPE_POINTS) -> np.ndarray:
    lower, upper = envelope_range(size)
    return np.linspace(lower, upper, points)


def envelope(size: ProblemSize, z_grid: Sequence[float]) -> BiasCurve:
    """The envelope zeta evaluated on a grid of per-cell empirical risks."""
    logger.debug(f"Evaluating envelope on {len(z_grid)} points for N={size.N}, k={size.k}")
    return BiasCurve(
        label="envelope",
        points=[BiasPoint(empirical_risk=float(z), bias=envelope_value(float(z), size)) for z in z_grid],
    )


def cell_curve(alpha: float, size: ProblemSize, p_grid: Sequence[float]) -> BiasCurve:
    """(k * mu_r_tilde, k * mu_s) for a fixed cell mass as p sweeps the grid."""
    points = []
    for p in p_grid:
        z, value = _scaled_cell(float(alpha), float(p), size)
        points.append(BiasPoint(empirical_risk=z, bias=value))
    return BiasCurve(label=f"alpha={alpha:.6g}", points=points)


def envelope_grid_search(
    size: ProblemSize,
    n_alpha: int = GRID_SEARCH_POINTS,
    n_p: int = GRID_SEARCH_POINTS,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Brute-force (k * mu_r_tilde, k * mu_s) over alpha in [1/N, 1/k], p in [0, 1/2].

    Used to cross-check the two-branch sweep; every returned value should lie
    under the envelope at its z.

    Returns:
        (z, values), flattened arrays of n_alpha * n_p points.
    """
    alphas = np.linspace(1.0 / size.N, 1.0 / size.k, n_alpha)
    ps = np.linspace(0.0, 0.5, n_p)
    weights = np.stack([occupancy_weights(size.N, float(a)) for a in alphas])
    tables = [kernel_table(size.N, float(p)) for p in ps]
    pi_nu_tilde = np.stack([t[0] for t in tables], axis=1)
    pi_nu = np.stack([t[1] for t in tables], axis=1)

    z = size.k * (weights @ pi_nu_tilde) / size.N
    values = size.k * alphas[:, None] * (weights @ pi_nu) - z
    return z.ravel(), values.ravel()


def concave_hull_relative_error(z: Sequence[float], values: Sequence[float]) -> float:
    """
    Largest relative gap between a curve and its least concave majorant.

    Returns:
        max over grid points of (hull - value) / value.
    """
    z = np.asarray(z, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(z)
    z, values = z[order], values[order]

    hull: list[int] = []
    for i in range(len(z)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (z[b] - z[a]) * (values[i] - values[a]) - (values[b] - values[a]) * (z[i] - z[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)

    hull_values = np.interp(z, z[hull], values[hull])
    positive = values > 0
    return float(np.max((hull_values[positive] - values[positive]) / values[positive]))


# ============================================================================
# Worst-case distribution
# ============================================================================

def threshold_empirical_risk(size: ProblemSize) -> float:
    """E_T: empirical risk of the worst distribution at alpha' = 1/N, p' = 1/2."""
    return (size.k - 1) * _cell_mu(1.0 / size.N, 0.5, size.N, CellFunction.EMPIRICAL_RISK)


def attainable_range(size: ProblemSize) -> tuple[float, float]:
    """Empirical risks reachable by the worst-distribution family."""
    upper = (size.k - 1) * _cell_mu(1.0 / size.k, 0.5, size.N, CellFunction.EMPIRICAL_RISK)
    return 0.0, upper


def worst_distribution(e0: float, size: ProblemSize) -> HistogramDistribution:
    """
    Distribution whose bias is within 1/k of the largest at empirical risk e0.

    k-1 cells share (alpha', p'); the last cell takes the remaining mass with
    p = 0 and adds nothing to the empirical risk. Below E_T, alpha' = 1/N and
    p' is solved for; above it, p' = 1/2 and alpha' is solved for.

    Raises:
        DomainError: if e0 is outside attainable_range(size).
    """
    lower, upper = attainable_range(size)
    if not lower - _RANGE_SLACK <= e0 <= upper + _RANGE_SLACK:
        raise DomainError(f"empirical risk {e0} is not attainable for N={size.N}, k={size.k}", lower, upper)
    if size.k == 1:
        return HistogramDistribution.from_arrays([1.0], [0.0])

    cells = size.k - 1
    alpha_min, alpha_max = 1.0 / size.N, 1.0 / size.k

    def empirical(alpha: float, p: float) -> float:
        return cells * _cell_mu(alpha, p, size.N, CellFunction.EMPIRICAL_RISK)

    if e0 <= threshold_empirical_risk(size):
        alpha = alpha_min
        p = solve_increasing(lambda q: empirical(alpha_min, q), e0, 0.0, 0.5)
    else:
        p = 0.5
        alpha = solve_increasing(lambda a: empirical(a, 0.5), e0, alpha_min, alpha_max)
    logger.debug(f"Worst distribution at e0={e0}: alpha'={alpha:.12g}, p'={p:.12g}")

    remainder = 1.0 - cells * alpha
    return HistogramDistribution.from_arrays([alpha] * cells + [remainder], [p] * cells + [0.0])


def max_bias_exact(e0: float, size: ProblemSize) -> BiasPoint:
    """Exact bias of the worst distribution at empirical risk e0."""
    point = bias(worst_distribution(e0, size), size)
    if not (-_RANGE_SLACK <= point.empirical_risk <= point.expected_risk + _RANGE_SLACK
            and point.expected_risk <= 0.5 + _RANGE_SLACK):
        raise InternalError(f"worst-case point out of order: {point}")
    return point
