"""Vapnik-Chervonenkis asymptotic risk estimate, for comparison with the exact bias."""

import logging
import math
from typing import Sequence

from scipy import special

from .errors import DomainError
from .models import BiasCurve, BiasPoint, ProblemSize, VcSetting, VcSolution
from .numerics import solve_increasing

logger = logging.getLogger(__name__)

# Returned (with saturated=True) when 1/kappa exceeds H(e0, F) for every representable F < 1.
SATURATION_RISK = 1.0 - 1e-12
_VC_XTOL = 1e-15


def entropy(pt: float, p: float) -> float:
    """
    Binary relative entropy H(pt, p) = pt ln(pt/p) + (1-pt) ln((1-pt)/(1-p)).

    0 ln 0 is taken as 0; p in {0, 1} gives +inf unless pt == p.
    """
    if not 0.0 <= pt <= 1.0 or not 0.0 <= p <= 1.0:
        raise ValueError(f"entropy needs arguments in [0, 1], got ({pt}, {p})")
    return float(special.rel_entr(pt, p) + special.rel_entr(1.0 - pt, 1.0 - p))


def solve_vc(e0: float, setting: VcSetting) -> VcSolution:
    """Root F >= e0 of H(e0, F) = 1/kappa."""
    if not 0.0 <= e0 < 1.0:
        raise DomainError(f"VC estimate needs 0 <= e0 < 1, got {e0}")
    budget = 0.0 if math.isinf(setting.kappa) else 1.0 / setting.kappa
    if budget == 0.0:
        return VcSolution(risk=e0)

    def h(f: float) -> float:
        return entropy(e0, f)

    if h(SATURATION_RISK) < budget:
        logger.warning(f"VC equation saturated at e0={e0}, 1/kappa={budget:.6g}")
        return VcSolution(risk=SATURATION_RISK, saturated=True)
    return VcSolution(risk=solve_increasing(h, budget, e0, SATURATION_RISK, xtol=_VC_XTOL))


def vc_bias(e0: float, size: ProblemSize) -> float:
    """F_VC(e0) - e0 for the histogram classifier (kappa = N / (k ln 2))."""
    return solve_vc(e0, VcSetting.for_histogram(size)).risk - e0


def vc_curve(size: ProblemSize, e0_grid: Sequence[float]) -> BiasCurve:
    return BiasCurve(
        label="vc",
        points=[BiasPoint(empirical_risk=float(e0), bias=vc_bias(float(e0), size)) for e0 in e0_grid],
    )
