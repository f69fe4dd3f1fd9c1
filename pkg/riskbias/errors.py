"""Exception hierarchy shared by all riskbias modules."""

from typing import Optional


class RiskBiasError(Exception):
    """Base class for riskbias errors."""


class DomainError(RiskBiasError, ValueError):
    """Argument lies outside the attainable or admissible range."""

    def __init__(self, message: str, lower: Optional[float] = None, upper: Optional[float] = None):
        if lower is not None and upper is not None:
            message = f"{message} (attainable interval: [{lower:.12g}, {upper:.12g}])"
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class InternalError(RiskBiasError, RuntimeError):
    """An invariant that should hold by construction was violated."""


class InsufficientRunsError(RiskBiasError):
    """A family member has too few simulation runs to fit a bound."""

    def __init__(self, member: str, runs: int, required: int):
        super().__init__(
            f"family member {member} has {runs} runs, at least {required} required"
        )
        self.member = member
        self.runs = runs
        self.required = required


class ConfigError(RiskBiasError):
    """Experiment configuration failed validation.

    Carries every problem found in one pass so the user can fix them together.
    """

    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(errors))
        self.errors = errors
