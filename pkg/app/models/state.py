from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.models.surface import ChartPoint, TangentVector


@dataclass(frozen=True)
class UnitTangentState:
    """theta = (x, v) on the unit tangent bundle, |v|_g = 1."""
    point: ChartPoint
    velocity: TangentVector

    @classmethod
    def from_array(cls, y) -> 'UnitTangentState':
        y = np.asarray(y, dtype=float)
        return cls(ChartPoint(float(y[0]), float(y[1])), TangentVector(float(y[2]), float(y[3])))

    def as_array(self) -> np.ndarray:
        return np.array([self.point.u, self.point.v, self.velocity.du, self.velocity.dv], dtype=float)

    def to_dict(self):
        return {'u': self.point.u, 'v': self.point.v, 'du': self.velocity.du, 'dv': self.velocity.dv}


@dataclass
class TrajectorySample:
    """
    Sampled integral curve of the magnetic vector field.

    ``states`` rows are (u, v, du, dv); ``energy`` holds |v|_g before any
    renormalization at every sample.
    """
    times: np.ndarray
    states: np.ndarray
    energy: np.ndarray
    energy_drift: float
    failed_at: Optional[float] = None

    def __len__(self) -> int:
        return len(self.times)

    def state(self, index: int) -> UnitTangentState:
        return UnitTangentState.from_array(self.states[index])

    @property
    def final(self) -> UnitTangentState:
        return self.state(-1)


@dataclass(frozen=True)
class VariationalState:
    """A base state together with the pushed-forward vertical variation."""
    base: UnitTangentState
    delta_x: TangentVector
    delta_v: TangentVector


@dataclass
class DeterminantTrace:
    """Signed alpha-determinant sampled along one trajectory; det_values[0] = 0."""
    times: np.ndarray
    det_values: np.ndarray
    trajectory: TrajectorySample

    @property
    def abs_values(self) -> np.ndarray:
        return np.abs(self.det_values)
