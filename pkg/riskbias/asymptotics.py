"""
Poisson limit of the cell expectations and the bias kernel psi.

With gamma = N * alpha held fixed the cell occupancy tends to Poisson(gamma),
which removes N from the problem. The maximal bias then reads

    S(E0) ~ psi(M * E0) / M - E0,    M = N / k,

where psi follows the same two branches as the worst distribution: p moving
from 0 to 1/2 at gamma = 1, then gamma growing at p = 1/2.
"""

import logging
import math
from functools import cache

import numpy as np
from scipy import stats

from .errors import DomainError
from .exact_bias import CellFunction, Kernel, kernel_table
from .models import CellParams, PoissonParams, ProblemSize, PsiBreakpoint
from .numerics import compensated_dot, grow_bracket, solve_increasing

logger = logging.getLogger(__name__)

# Poisson mass left out of the truncated sums.
POISSON_TAIL = 1e-13
_DOMAIN_SLACK = 1e-12


def _poisson_cutoff(gamma: float) -> int:
    return max(1, int(stats.poisson.isf(POISSON_TAIL, gamma)) + 1)


def rho(params: PoissonParams, kernel: Kernel) -> float:
    """Poisson(gamma)-weighted average of a kernel, truncated once the tail mass drops below 1e-13."""
    if params.gamma == 0.0:
        n_max, weights = 0, np.ones(1)
    else:
        n_max = _poisson_cutoff(params.gamma)
        weights = stats.poisson.pmf(np.arange(n_max + 1), params.gamma)
    pi_nu_tilde, pi_nu = kernel_table(n_max, float(params.p))
    table = pi_nu_tilde if Kernel(kernel) is Kernel.NU_TILDE else pi_nu
    return compensated_dot(weights, table)


def _rho(gamma: float, p: float, kernel: Kernel) -> float:
    return rho(PoissonParams(gamma=gamma, p=p), kernel)


def rho_cell(cell: CellParams, size: ProblemSize, phi: CellFunction) -> float:
    """Poisson approximation of exact_bias.cell_expectation."""
    phi = CellFunction(phi)
    gamma = size.N * cell.alpha
    empirical = _rho(gamma, cell.p, Kernel.NU_TILDE) / size.N
    if phi is CellFunction.EMPIRICAL_RISK:
        return empirical
    risk = gamma / size.N * _rho(gamma, cell.p, Kernel.NU)
    if phi is CellFunction.RISK:
        return risk
    return risk - empirical


@cache
def psi_breakpoint() -> PsiBreakpoint:
    """z_T = rho_nu_tilde(1, 1/2), computed once."""
    z_T = _rho(1.0, 0.5, Kernel.NU_TILDE)
    logger.debug(f"psi breakpoint z_T={z_T:.12g}")
    return PsiBreakpoint(z_T=z_T)


def invert_rho1(z: float) -> float:
    """p in [0, 1/2] with rho_nu_tilde(1, p) = z."""
    z_T = psi_breakpoint().z_T
    if not -_DOMAIN_SLACK <= z <= z_T + _DOMAIN_SLACK:
        raise DomainError(f"invert_rho1 needs z in [0, z_T], got {z}", 0.0, z_T)
    return solve_increasing(lambda p: _rho(1.0, p, Kernel.NU_TILDE), z, 0.0, 0.5)


def invert_rho2(z: float) -> float:
    """gamma >= 1 with rho_nu_tilde(gamma, 1/2) = z."""
    z_T = psi_breakpoint().z_T
    if z < z_T - _DOMAIN_SLACK:
        raise DomainError(f"invert_rho2 needs z >= z_T={z_T:.12g}, got {z}")

    def rho2(gamma: float) -> float:
        return _rho(gamma, 0.5, Kernel.NU_TILDE)

    lower, upper = grow_bracket(rho2, z, 1.0, 2.0)
    return solve_increasing(rho2, z, lower, upper)


def psi(z: float) -> float:
    """Asymptotic bias kernel: rho_nu(1, p*(z)) up to z_T, gamma*(z)/2 beyond."""
    if z < 0.0:
        raise DomainError(f"psi needs z >= 0, got {z}")
    if z <= psi_breakpoint().z_T:
        return _rho(1.0, invert_rho1(z), Kernel.NU)
    return 0.5 * invert_rho2(z)


def max_admissible_e0(M: float) -> float:
    """Largest E0 with psi(M * E0) / M <= 1/2, i.e. rho_nu_tilde(M, 1/2) / M."""
    if M < 1.0:
        raise DomainError(f"relative sample size M must be >= 1, got {M}")
    return _rho(float(M), 0.5, Kernel.NU_TILDE) / M


def max_bias_asymptotic(e0: float, M: float) -> float:
    """
    Approximate maximal bias psi(M * e0) / M - e0.

    Raises:
        DomainError: if M < 1 or e0 lies outside [0, max_admissible_e0(M)];
            the error carries the admissible interval.
    """
    upper = max_admissible_e0(M)
    if not -_DOMAIN_SLACK <= e0 <= upper + _DOMAIN_SLACK:
        raise DomainError(f"e0={e0} is outside the domain of the asymptotic bias for M={M}", 0.0, upper)
    return psi(M * min(max(e0, 0.0), upper)) / M - e0


# ============================================================================
# Closed-form approximation
# ============================================================================

def psi2_bar_inverse(t: float) -> float:
    """Closed-form approximation of the inverse of psi_2, valid for t >= 1/2."""
    z_T = psi_breakpoint().z_T
    return t * (1.0 - math.sqrt(3.0) * (1.0 - 2.0 * z_T) / math.sqrt(1.0 + 4.0 * t))


def psi_bar(z: float) -> float:
    """Closed-form psi: linear up to z_T, numerically inverted psi2_bar_inverse beyond."""
    if z < 0.0:
        raise DomainError(f"psi_bar needs z >= 0, got {z}")
    z_T = psi_breakpoint().z_T
    if z <= z_T:
        base = 1.0 / (2.0 * math.e)
        return base + (0.5 - base) * z / z_T
    lower, upper = grow_bracket(psi2_bar_inverse, z, 0.5, 1.0)
    return solve_increasing(psi2_bar_inverse, z, lower, upper)


def max_admissible_e0_psi_bar(M: float) -> float:
    """Largest E0 with psi_bar(M * E0) / M <= 1/2."""
    if M < 1.0:
        raise DomainError(f"relative sample size M must be >= 1, got {M}")
    return psi2_bar_inverse(M / 2.0) / M


def max_bias_psi_bar(e0: float, M: float) -> float:
    """Closed-form counterpart of max_bias_asymptotic."""
    upper = max_admissible_e0_psi_bar(M)
    if not -_DOMAIN_SLACK <= e0 <= upper + _DOMAIN_SLACK:
        raise DomainError(f"e0={e0} is outside the domain of the closed-form bias for M={M}", 0.0, upper)
    return psi_bar(M * min(max(e0, 0.0), upper)) / M - e0


def psi_relative_error(z: float) -> float:
    """(psi_bar(z) - psi(z)) / psi(z)."""
    exact = psi(z)
    return (psi_bar(z) - exact) / exact


def auxiliary_fit(gamma: float) -> tuple[float, float]:
    """
    Both sides of the fit behind psi2_bar_inverse.

    Returns:
        (1 - 2 rho2(gamma) / gamma, sqrt(3) (1 - 2 z_T) / sqrt(1 + 2 gamma))
    """
    z_T = psi_breakpoint().z_T
    left = 1.0 - 2.0 * _rho(gamma, 0.5, Kernel.NU_TILDE) / gamma
    right = math.sqrt(3.0) * (1.0 - 2.0 * z_T) / math.sqrt(1.0 + 2.0 * gamma)
    return left, right
