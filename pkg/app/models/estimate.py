from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np


@dataclass(frozen=True)
class IntegralEstimate:
    """Monte Carlo estimate of one side of the counting identity."""
    value: float
    std_error: float
    n_samples: int
    T: float
    n_failed: int = 0
    n_resampled: int = 0

    def to_dict(self):
        return {
            'value': self.value,
            'std_error': self.std_error,
            'n_samples': self.n_samples,
            'T': self.T,
            'n_failed': self.n_failed,
            'n_resampled': self.n_resampled,
        }


@dataclass
class GrowthEstimate:
    """Least-squares exponential growth rate of a positive series."""
    T_values: np.ndarray
    log_values: np.ndarray
    rate: float
    ci_half_width: float
    window: Tuple[float, float]
    n_excluded: int = 0

    @property
    def ci(self) -> Tuple[float, float]:
        return (self.rate - self.ci_half_width, self.rate + self.ci_half_width)

    def to_dict(self):
        low, high = self.ci
        return {
            'rate': self.rate,
            'ci_half_width': self.ci_half_width,
            'ci_low': low,
            'ci_high': high,
            'window': list(self.window),
            'n_excluded': self.n_excluded,
        }


@dataclass
class LemmaRow:
    """Both sides of the identity at one horizon T and the verdict."""
    T: float
    lhs: IntegralEstimate
    rhs: IntegralEstimate
    allowance: float
    passed: bool

    @property
    def discrepancy(self) -> float:
        return abs(self.lhs.value - self.rhs.value)

    def to_dict(self):
        return {
            'T': self.T,
            'lhs': self.lhs.value,
            'lhs_se': self.lhs.std_error,
            'rhs': self.rhs.value,
            'rhs_se': self.rhs.std_error,
            'discrepancy': self.discrepancy,
            'allowance': self.allowance,
            'pass': self.passed,
        }


@dataclass
class Report:
    """Outcome of a check: PASS, FAIL or INCOMPLETE, with its payload."""
    status: str
    payload: dict = field(default_factory=dict)
    series: List[Tuple[float, float]] = field(default_factory=list)

    def to_dict(self):
        data = dict(self.payload)
        data['status'] = self.status
        return data
