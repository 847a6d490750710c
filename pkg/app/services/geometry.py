"""
Surfaces in conformal charts.

A surface carries g = exp(2*lambda) * (du^2 + dv^2) and the magnetic profile b.
All functions accept a single chart point (``ChartPoint`` or length-2 sequence)
or an array of points with trailing dimension 2 and broadcast accordingly;
single inputs give typed results, arrays give arrays.
"""

import logging
import math
from typing import Iterable, Optional, Union

import numpy as np
import sympy as sp

from app.extensions.random_streams import substream
from app.models.surface import ChartPoint, SurfaceKind, SurfaceModel, TangentVector
from app.models.state import UnitTangentState
from app.services.expressions import ScalarField, V
from app.utils.geometry_exceptions import (
    ChartDomainError, GeometryError, SamplingConfigurationError, UnsupportedOperationError,
)

logger = logging.getLogger(__name__)

# Midpoint-rule resolution per axis for area(); spectrally accurate for smooth periodic lambda.
AREA_QUADRATURE_NODES = 512
# Grid used to bound exp(2*lambda) for rejection sampling, and the safety factor on its max.
DENSITY_BOUND_NODES = 256
DENSITY_BOUND_MARGIN = 1.05
MAX_REJECTION_ATTEMPTS = 100000

_ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


def make_surface(kind: Union[str, SurfaceKind], Lx: Optional[float] = None, Ly: Optional[float] = None,
                 lambda_expr: Optional[str] = None, b_expr: str = '1', s: float = 0.0) -> SurfaceModel:
    """
    Build and validate a surface model.

    Raises:
        GeometryError: bad periods, a lambda on a kind that fixes its own metric,
            or torus expressions that are not periodic in (Lx, Ly).
        ExpressionError: an expression outside the grammar.
    """
    try:
        kind = SurfaceKind(kind)
    except ValueError:
        raise GeometryError(f"Unknown surface kind {kind!r}")

    b_field = ScalarField.parse(b_expr if b_expr is not None else '1')

    if kind is SurfaceKind.HYPERBOLIC_PLANE:
        if lambda_expr is not None:
            raise GeometryError("lambda is fixed to -log(v) on hyperbolic_plane")
        lambda_field = ScalarField(-sp.log(V), source='-log(v)')
        return SurfaceModel(kind=kind, lambda_field=lambda_field, b_field=b_field, s=float(s))

    if Lx is None or Ly is None or not (Lx > 0 and Ly > 0):
        raise GeometryError("Torus periods Lx and Ly must be positive")
    if kind is SurfaceKind.FLAT_TORUS:
        if lambda_expr is not None:
            raise GeometryError("lambda is not allowed for flat_torus")
        lambda_field = ScalarField.constant(0.0)
    else:
        if lambda_expr is None:
            raise GeometryError("conformal_torus requires a lambda expression")
        lambda_field = ScalarField.parse(lambda_expr)

    surface = SurfaceModel(kind=kind, lambda_field=lambda_field, b_field=b_field, s=float(s),
                           Lx=float(Lx), Ly=float(Ly))
    _check_periodic(surface, lambda_field, 'lambda')
    _check_periodic(surface, b_field, 'b')
    return surface


def _check_periodic(surface: SurfaceModel, scalar: ScalarField, name: str) -> None:
    if scalar.is_constant:
        return
    probe = np.array([[0.137, 0.291], [0.5, 0.77], [0.913, 0.05], [0.31, 0.62]]) * surface.periods
    base = scalar.value(probe)
    scale = 1.0 + np.max(np.abs(base))
    for shift in (np.array([surface.Lx, 0.0]), np.array([0.0, surface.Ly])):
        if np.max(np.abs(scalar.value(probe + shift) - base)) > 1e-9 * scale:
            raise GeometryError(f"{name} expression {scalar.source!r} is not periodic on the "
                                f"{surface.Lx} x {surface.Ly} torus")


def _points(p) -> np.ndarray:
    return np.asarray(p, dtype=float)


def check_domain(surface: SurfaceModel, points: np.ndarray) -> None:
    """Raise ChartDomainError unless every point lies in the chart domain."""
    if not np.all(np.isfinite(points)):
        raise ChartDomainError("Non-finite chart point")
    if surface.kind is SurfaceKind.HYPERBOLIC_PLANE and np.any(points[..., 1] <= 0.0):
        raise ChartDomainError("hyperbolic_plane requires v > 0")


def _require_torus(surface: SurfaceModel, operation: str) -> None:
    if not surface.kind.is_torus:
        raise UnsupportedOperationError(f"{operation} is only defined on torus surfaces")


def _as_point(values: np.ndarray):
    return ChartPoint(float(values[0]), float(values[1])) if values.ndim == 1 else values


def _as_vector(values: np.ndarray):
    return TangentVector(float(values[0]), float(values[1])) if values.ndim == 1 else values


def _as_scalar(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def conformal_factor(surface: SurfaceModel, p):
    """exp(2*lambda(p)); the metric is this factor times the euclidean dot product."""
    points = _points(p)
    check_domain(surface, points)
    return _as_scalar(np.exp(2.0 * surface.lambda_field.value(points)))


def christoffel(surface: SurfaceModel, p) -> np.ndarray:
    """
    Christoffel symbols Gamma[..., k, i, j] of the conformal metric.

    With d = grad(lambda): Gamma^k_ij = delta_ki d_j + delta_kj d_i - delta_ij d_k.
    """
    points = _points(p)
    check_domain(surface, points)
    grad = surface.lambda_field.gradient(points)
    eye = np.eye(2)
    return (np.einsum('ki,...j->...kij', eye, grad)
            + np.einsum('kj,...i->...kij', eye, grad)
            - np.einsum('ij,...k->...kij', eye, grad))


def rotate90(surface: SurfaceModel, p, w):
    """Metric rotation by +90 degrees; euclidean (du, dv) -> (-dv, du) in a conformal chart."""
    check_domain(surface, _points(p))
    vectors = np.asarray(w, dtype=float)
    return _as_vector(vectors @ _ROTATION.T)


def metric_norm(surface: SurfaceModel, p, w):
    """|w|_g at p."""
    points = _points(p)
    check_domain(surface, points)
    vectors = np.asarray(w, dtype=float)
    return _as_scalar(np.exp(surface.lambda_field.value(points)) * np.hypot(vectors[..., 0], vectors[..., 1]))


def area_form(surface: SurfaceModel, p, a, b):
    """dA_g(a, b) at p, positive for the (du, dv) orientation."""
    points = _points(p)
    check_domain(surface, points)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return _as_scalar(np.exp(2.0 * surface.lambda_field.value(points)) * cross)


def wrap(surface: SurfaceModel, p):
    """Canonical representative of a torus point, 0 <= u < Lx and 0 <= v < Ly."""
    _require_torus(surface, "wrap")
    return _as_point(_wrap_array(surface, _points(p)))


def _wrap_array(surface: SurfaceModel, points: np.ndarray) -> np.ndarray:
    periods = surface.periods
    reduced = np.mod(points, periods)
    return np.where(reduced >= periods, reduced - periods, reduced)


def displacement(surface: SurfaceModel, p, q):
    """q - p wrapped componentwise into (-L/2, L/2]."""
    _require_torus(surface, "displacement")
    return _as_vector(_displacement_array(surface, _points(p), _points(q)))


def _displacement_array(surface: SurfaceModel, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    periods = surface.periods
    delta = q - p
    return delta - periods * np.ceil(delta / periods - 0.5)


def area(surface: SurfaceModel) -> float:
    """Riemannian area of the fundamental domain."""
    _require_torus(surface, "area")
    cached = surface._cache.get('area')
    if cached is not None:
        return cached
    if surface.lambda_field.is_constant:
        factor = float(np.exp(2.0 * surface.lambda_field.value(np.zeros(2))))
        value = surface.Lx * surface.Ly * factor
    else:
        nodes = AREA_QUADRATURE_NODES
        grid = _midpoint_grid(surface, nodes)
        value = surface.Lx * surface.Ly * float(np.mean(np.exp(2.0 * surface.lambda_field.value(grid))))
        logger.debug(f"Area of {surface.lambda_field.source!r} torus by {nodes}x{nodes} midpoint rule: {value}")
    surface._cache['area'] = value
    return value


def liouville_volume(surface: SurfaceModel) -> float:
    """Liouville volume of the unit tangent bundle, 2*pi*area."""
    return 2.0 * math.pi * area(surface)


def _midpoint_grid(surface: SurfaceModel, nodes: int) -> np.ndarray:
    us = (np.arange(nodes) + 0.5) * surface.Lx / nodes
    vs = (np.arange(nodes) + 0.5) * surface.Ly / nodes
    return np.stack(np.meshgrid(us, vs, indexing='ij'), axis=-1)


def _density_bound(surface: SurfaceModel) -> float:
    cached = surface._cache.get('density_bound')
    if cached is not None:
        return cached
    if surface.lambda_field.is_constant:
        bound = float(np.exp(2.0 * surface.lambda_field.value(np.zeros(2))))
    else:
        grid = _midpoint_grid(surface, DENSITY_BOUND_NODES)
        bound = DENSITY_BOUND_MARGIN * float(np.max(np.exp(2.0 * surface.lambda_field.value(grid))))
    if not np.isfinite(bound) or bound <= 0.0:
        raise SamplingConfigurationError(f"Rejection bound {bound} for exp(2*lambda) is not finite")
    surface._cache['density_bound'] = bound
    return bound


def unit_vectors(surface: SurfaceModel, points: np.ndarray, angles) -> np.ndarray:
    """g-unit vectors at ``points`` making euclidean angle ``angles`` with the u axis."""
    scale = np.exp(-surface.lambda_field.value(points))
    angles = np.asarray(angles, dtype=float)
    return np.stack([scale * np.cos(angles), scale * np.sin(angles)], axis=-1)


def launch_states(surface: SurfaceModel, points, angles) -> np.ndarray:
    """Stack (u, v, du, dv) rows for unit-speed launches."""
    points = _points(points)
    check_domain(surface, points)
    velocity = unit_vectors(surface, points, angles)
    points = np.broadcast_to(points, velocity.shape)
    return np.concatenate([points, velocity], axis=-1)


def sample_area_point(surface: SurfaceModel, rng: np.random.Generator) -> np.ndarray:
    """One chart point with density proportional to exp(2*lambda) du dv (rejection sampling)."""
    _require_torus(surface, "sample_area_point")
    bound = _density_bound(surface)
    periods = surface.periods
    for _ in range(MAX_REJECTION_ATTEMPTS):
        candidate = rng.uniform(0.0, 1.0, size=2) * periods
        if rng.uniform(0.0, bound) <= float(np.exp(2.0 * surface.lambda_field.value(candidate))):
            return candidate
    raise SamplingConfigurationError(
        f"No point accepted after {MAX_REJECTION_ATTEMPTS} attempts; check the lambda expression")


def sample_unit_tangent(surface: SurfaceModel, rng: np.random.Generator) -> UnitTangentState:
    """Liouville-uniform draw from the unit tangent bundle of a torus."""
    point = sample_area_point(surface, rng)
    angle = rng.uniform(0.0, 2.0 * math.pi)
    state = np.concatenate([point, unit_vectors(surface, point, angle)])
    return UnitTangentState.from_array(state)


def sample_liouville(surface: SurfaceModel, seed: int, indices: Iterable[int], tag: int = 0) -> np.ndarray:
    """Rows (u, v, du, dv) for the given sample indices, each from its own substream."""
    rows = [sample_unit_tangent(surface, substream(seed, index, tag)).as_array() for index in indices]
    return np.array(rows, dtype=float).reshape(-1, 4)
