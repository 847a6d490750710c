from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from app.services.expressions import ScalarField


class SurfaceKind(str, Enum):
    """Model surfaces supported by the lab."""
    FLAT_TORUS = 'flat_torus'
    HYPERBOLIC_PLANE = 'hyperbolic_plane'
    CONFORMAL_TORUS = 'conformal_torus'

    @property
    def is_torus(self) -> bool:
        return self is not SurfaceKind.HYPERBOLIC_PLANE


class ChartPoint(NamedTuple):
    """A point of the surface in chart coordinates."""
    u: float
    v: float


class TangentVector(NamedTuple):
    """Chart components of a tangent vector at an implicit base point."""
    du: float
    dv: float


@dataclass(frozen=True)
class SurfaceModel:
    """
    A surface in a conformal chart, g = exp(2*lambda) * euclidean, with a magnetic
    field Omega = s * b * dA_g.

    Build instances with ``app.services.geometry.make_surface`` which validates
    periods, chart domain and periodicity of the expressions.
    """
    kind: SurfaceKind
    lambda_field: ScalarField
    b_field: ScalarField
    s: float
    Lx: Optional[float] = None
    Ly: Optional[float] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def periods(self) -> np.ndarray:
        return np.array([self.Lx, self.Ly], dtype=float)

    def to_dict(self):
        """Describe the surface for reports."""
        return {
            'kind': self.kind.value,
            'Lx': self.Lx,
            'Ly': self.Ly,
            'lambda': self.lambda_field.source,
            'b': self.b_field.source,
            's': self.s,
        }
