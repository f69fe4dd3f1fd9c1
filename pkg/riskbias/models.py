"""Pydantic value types for distributions, curves and reports."""

from fractions import Fraction
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

ALPHA_SUM_TOLERANCE = 1e-12


# ============================================================================
# Histogram classifier
# ============================================================================

class ProblemSize(BaseModel):
    """Sample size N and number of cells k of a histogram classifier."""

    model_config = ConfigDict(frozen=True)

    N: int = Field(..., ge=1, description="Sample size")
    k: int = Field(..., ge=1, description="Number of cells")

    @model_validator(mode='after')
    def reject_sparse_regime(self):
        if self.N < self.k:
            raise ValueError(f'N={self.N} < k={self.k}: the N < k regime is not supported')
        return self

    @property
    def M(self) -> Fraction:
        """Relative sample size N/k (average points per cell)."""
        return Fraction(self.N, self.k)


class CellParams(BaseModel):
    """Mass of one cell and the class-1 probability inside it."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., ge=0.0, le=1.0, description="Probability mass of the cell")
    p: float = Field(..., ge=0.0, le=1.0, description="Prob(y=1 | x in cell)")


class HistogramDistribution(BaseModel):
    """Joint distribution on k cells x {0, 1}."""

    model_config = ConfigDict(frozen=True)

    cells: tuple[CellParams, ...] = Field(..., min_length=1)

    @model_validator(mode='after')
    def masses_sum_to_one(self):
        total = sum(cell.alpha for cell in self.cells)
        if abs(total - 1.0) > ALPHA_SUM_TOLERANCE:
            raise ValueError(f'cell masses sum to {total!r}, expected 1')
        return self

    @classmethod
    def from_arrays(cls, alphas: Sequence[float], ps: Sequence[float]) -> "HistogramDistribution":
        if len(alphas) != len(ps):
            raise ValueError('alphas and ps must have the same length')
        return cls(cells=tuple(CellParams(alpha=float(a), p=float(p)) for a, p in zip(alphas, ps)))

    @classmethod
    def uniform(cls, k: int, p: float) -> "HistogramDistribution":
        return cls.from_arrays([1.0 / k] * k, [p] * k)

    @property
    def k(self) -> int:
        return len(self.cells)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([cell.alpha for cell in self.cells])

    @property
    def ps(self) -> np.ndarray:
        return np.array([cell.p for cell in self.cells])


class SampleCounts(BaseModel):
    """Per-cell counts (m_j class-1 points, n_j points) of a drawn sample."""

    model_config = ConfigDict(frozen=True)

    counts: tuple[tuple[int, int], ...] = Field(..., min_length=1)

    @field_validator('counts')
    @classmethod
    def counts_consistent(cls, v):
        for j, (m, n) in enumerate(v):
            if not 0 <= m <= n:
                raise ValueError(f'cell {j}: need 0 <= m <= n, got m={m}, n={n}')
        return v

    @classmethod
    def from_arrays(cls, m: Sequence[int], n: Sequence[int]) -> "SampleCounts":
        return cls(counts=tuple((int(a), int(b)) for a, b in zip(m, n)))

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def N(self) -> int:
        return sum(n for _, n in self.counts)

    @property
    def m(self) -> np.ndarray:
        return np.array([m for m, _ in self.counts], dtype=np.int64)

    @property
    def n(self) -> np.ndarray:
        return np.array([n for _, n in self.counts], dtype=np.int64)


class BiasPoint(BaseModel):
    """Expected empirical risk and the bias on top of it."""

    model_config = ConfigDict(frozen=True)

    empirical_risk: float = Field(..., description="Expected empirical risk E0")
    bias: float = Field(..., description="Expected risk minus expected empirical risk")

    @computed_field
    @property
    def expected_risk(self) -> float:
        return self.empirical_risk + self.bias


class SimulatedBiasPoint(BiasPoint):
    """Monte Carlo estimate of a bias point for one family member."""

    param_name: str
    param: float
    se_empirical: float = Field(..., ge=0.0)
    se_risk: float = Field(..., ge=0.0)
    se_bias: float = Field(..., ge=0.0)
    reps: int = Field(..., ge=1)


class BiasCurve(BaseModel):
    """A labelled sequence of bias points (bound or simulation)."""

    label: str
    points: list[BiasPoint] = Field(default_factory=list)

    @property
    def empirical_risks(self) -> np.ndarray:
        return np.array([pt.empirical_risk for pt in self.points])

    @property
    def biases(self) -> np.ndarray:
        return np.array([pt.bias for pt in self.points])


# ============================================================================
# Asymptotics and VC
# ============================================================================

class PoissonParams(BaseModel):
    """Expected cell occupancy gamma = N * alpha and class-1 probability."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(..., ge=0.0)
    p: float = Field(..., ge=0.0, le=1.0)


class PsiBreakpoint(BaseModel):
    """Switch point z_T between the two branches of psi."""

    model_config = ConfigDict(frozen=True)

    z_T: float = Field(..., gt=0.0, lt=0.5)


class VcSetting(BaseModel):
    """Complexity ratio kappa = N / ln|Lambda|."""

    model_config = ConfigDict(frozen=True)

    kappa: float = Field(..., gt=0.0, description="N / ln(number of decision rules); may be inf")

    @classmethod
    def for_histogram(cls, size: ProblemSize) -> "VcSetting":
        """Histogram classifier over k cells has 2^k rules."""
        return cls(kappa=size.N / (size.k * np.log(2.0)))


class VcSolution(BaseModel):
    """Solution of the VC equation; saturated when the root is pinned near 1."""

    model_config = ConfigDict(frozen=True)

    risk: float
    saturated: bool = False


# ============================================================================
# Continuous models
# ============================================================================

class ContinuousModel(BaseModel):
    """Uniform x on [0,1]^dim, P(y=1|x) = g1 inside [0, delta]^dim and g2 outside."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(..., ge=1)
    theta: float = Field(..., ge=0.0, le=1.0, description="Volume of the inner cube")
    g1: float = Field(..., ge=0.0, le=1.0)
    g2: float = Field(..., ge=0.0, le=1.0)

    @property
    def delta(self) -> float:
        return self.theta ** (1.0 / self.dim)


class FamilyMember(BaseModel):
    """One distribution of a model family, labelled by its sweep parameter."""

    model_config = ConfigDict(frozen=True)

    index: int
    param_name: str
    param: float
    model: ContinuousModel
    family: int = Field(0, ge=0, description="Stream key of the owning family")

    @property
    def label(self) -> str:
        return f"{self.param_name}={self.param:.6g}"


# Replicate streams of different families never overlap; 0 is left to the histogram engine.
FAMILY_STREAM_KEYS = {"A": 1, "B": 2, "confidence": 3}


class ModelFamily(BaseModel):
    """
    Parametric set of continuous models.

    A: g2 = 1; g1 swept over [0, 0.5] at theta = theta0, then theta swept from
       theta0 down to theta0 * theta_end_ratio at g1 = 0.5.
    B: theta = 0.5, g1 = g', g2 = 1 - g', g' over [0, 0.5].
    confidence: same construction as B, used for the confidence bounds.
    """

    model_config = ConfigDict(frozen=True)

    variant: Literal["A", "B", "confidence"]
    dim: int = Field(2, ge=1)
    theta0: float = Field(0.83, gt=0.0, le=1.0)
    n_g1: int = Field(20, ge=2)
    n_theta: int = Field(20, ge=1)
    theta_end_ratio: float = Field(0.1, gt=0.0, lt=1.0)
    n_members: int = Field(11, ge=2, description="Number of g' values for B and confidence")
    g_max: float = Field(0.5, gt=0.0, le=0.5)

    @property
    def stream_key(self) -> int:
        return FAMILY_STREAM_KEYS[self.variant]

    def members(self) -> list[FamilyMember]:
        members: list[FamilyMember] = []
        if self.variant == "A":
            for g1 in np.linspace(0.0, self.g_max, self.n_g1):
                members.append(FamilyMember(
                    family=self.stream_key, index=len(members), param_name="g1", param=float(g1),
                    model=ContinuousModel(dim=self.dim, theta=self.theta0, g1=float(g1), g2=1.0),
                ))
            thetas = np.linspace(self.theta0, self.theta0 * self.theta_end_ratio, self.n_theta + 1)[1:]
            for theta in thetas:
                members.append(FamilyMember(
                    family=self.stream_key, index=len(members), param_name="theta", param=float(theta),
                    model=ContinuousModel(dim=self.dim, theta=float(theta), g1=self.g_max, g2=1.0),
                ))
        else:
            for g in np.linspace(0.0, self.g_max, self.n_members):
                members.append(FamilyMember(
                    family=self.stream_key, index=len(members), param_name="g", param=float(g),
                    model=ContinuousModel(dim=self.dim, theta=0.5, g1=float(g), g2=1.0 - float(g)),
                ))
        return members


# ============================================================================
# Monte Carlo reports
# ============================================================================

class RiskSummary(BaseModel):
    """Mean, standard error and replicate count of a simulated quantity."""

    model_config = ConfigDict(frozen=True)

    mean: float
    se: float = Field(..., ge=0.0)
    reps: int = Field(..., ge=1)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "RiskSummary":
        arr = np.asarray(values, dtype=float)
        se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
        return cls(mean=float(arr.mean()), se=se, reps=int(arr.size))


class RiskReport(BaseModel):
    """Empirical risk, leave-one-out estimate and true risk over replicates."""

    model_config = ConfigDict(frozen=True)

    empirical_risk: RiskSummary
    loo_estimate: Optional[RiskSummary] = None
    true_risk: RiskSummary
    bias: RiskSummary = Field(..., description="Paired difference true - empirical")


# ============================================================================
# Confidence bounds
# ============================================================================

class EstimatingFunction(BaseModel):
    """Monotone right-continuous step function u -> risk upper bound."""

    model_config = ConfigDict(frozen=True)

    breakpoints: tuple[float, ...] = Field(..., min_length=1)
    values: tuple[float, ...] = Field(..., min_length=1)

    @model_validator(mode='after')
    def monotone_steps(self):
        if len(self.breakpoints) != len(self.values):
            raise ValueError('breakpoints and values must have equal length')
        if any(later <= earlier for earlier, later in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError('breakpoints must be strictly increasing')
        if any(later < earlier for earlier, later in zip(self.values, self.values[1:])):
            raise ValueError('values must be nondecreasing')
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ValueError('values must lie in [0, 1]')
        return self

    def __call__(self, u):
        """Evaluate at scalar or array u; constant beyond both ends."""
        idx = np.searchsorted(np.asarray(self.breakpoints), u, side='right') - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        result = np.asarray(self.values)[idx]
        return float(result) if np.ndim(result) == 0 else result


class MemberCoverage(BaseModel):
    """Coverage of an estimating function on one family member."""

    model_config = ConfigDict(frozen=True)

    param: float
    coverage: float = Field(..., ge=0.0, le=1.0)
    reps: int = Field(..., ge=1)
    se: float = Field(..., ge=0.0)


class CoverageReport(BaseModel):
    """Per-member coverage and its minimum."""

    members: list[MemberCoverage]

    @computed_field
    @property
    def min_coverage(self) -> float:
        return min(m.coverage for m in self.members)


class LabeledPoint(BaseModel):
    """One observation (x, y) with x in the unit hypercube."""

    model_config = ConfigDict(frozen=True)

    x: tuple[float, ...] = Field(..., min_length=1)
    y: Literal[0, 1]

    @field_validator('x')
    @classmethod
    def inside_unit_cube(cls, v):
        if any(not 0.0 <= c <= 1.0 for c in v):
            raise ValueError('coordinates must lie in [0, 1]')
        return v
