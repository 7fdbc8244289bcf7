"""Exception hierarchy for cavity QND computations"""
from typing import Optional


class QndError(Exception):
    """Base class for every error raised by the package"""


class InvalidParameterError(QndError, ValueError):
    """A parameter is outside the domain an operation accepts"""


class ResolutionError(InvalidParameterError):
    """A discretization is too coarse to resolve the pulse"""


class ConvergenceError(QndError):
    """A numerical procedure did not reach its tolerance"""

    def __init__(
        self,
        message: str,
        estimate: Optional[float] = None,
        error_bound: Optional[float] = None,
        tolerance: Optional[float] = None,
    ):
        self.estimate = estimate
        self.error_bound = error_bound
        self.tolerance = tolerance
        detail = []
        if error_bound is not None:
            detail.append(f"achieved {error_bound:.3g}")
        if tolerance is not None:
            detail.append(f"requested {tolerance:.3g}")
        if estimate is not None:
            detail.append(f"estimate {estimate:.12g}")
        super().__init__(f"{message} ({', '.join(detail)})" if detail else message)


class BracketError(ConvergenceError):
    """Root finder could not bracket the target value"""


class NormDriftError(ConvergenceError):
    """Full-model state norm drifted beyond the allowed bound"""
