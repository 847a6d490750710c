"""
Magnetic geodesic flow on the unit tangent bundle.

The state is the row (u, v, du, dv). The equation of motion is
D/dt(gamma') = Y(gamma') with Y = s * b * (metric rotation), i.e.

    x' = v
    v'^k = -Gamma^k_ij v^i v^j + s * b(x) * (i_g v)^k

integrated with the classical fourth-order Runge-Kutta scheme at a fixed step.
Array helpers (``field``, ``advance``) work on any leading batch shape.
"""

import logging
import math

import numpy as np

from app.models.state import TrajectorySample, UnitTangentState
from app.models.surface import SurfaceKind, SurfaceModel, TangentVector
from app.services import geometry
from app.utils.flow_exceptions import IntegrationError

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3


def _as_state_array(state) -> np.ndarray:
    if isinstance(state, UnitTangentState):
        return state.as_array()
    return np.asarray(state, dtype=float)


def acceleration(surface: SurfaceModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """v' from the conformal Christoffel contraction plus the Lorentz force."""
    grad = surface.lambda_field.gradient(x)
    grad_dot_v = np.sum(grad * v, axis=-1, keepdims=True)
    speed_sq = np.sum(v * v, axis=-1, keepdims=True)
    rotated = np.stack([-v[..., 1], v[..., 0]], axis=-1)
    lorentz = surface.s * surface.b_field.value(x)[..., None] * rotated
    return -2.0 * v * grad_dot_v + speed_sq * grad + lorentz


def field(surface: SurfaceModel, y: np.ndarray) -> np.ndarray:
    """The magnetic vector field X(theta) = (v, Y(v)) on state rows."""
    x = y[..., :2]
    v = y[..., 2:]
    return np.concatenate([v, acceleration(surface, x, v)], axis=-1)


def rk4(fn, y: np.ndarray, h) -> np.ndarray:
    """One classical RK4 step of y' = fn(y); ``h`` may be an array over the batch."""
    h = np.asarray(h, dtype=float)
    if h.ndim:
        h = h[..., None]
    k1 = fn(y)
    k2 = fn(y + 0.5 * h * k1)
    k3 = fn(y + 0.5 * h * k2)
    k4 = fn(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def speed(surface: SurfaceModel, y: np.ndarray) -> np.ndarray:
    """|v|_g for state rows."""
    return np.exp(surface.lambda_field.value(y[..., :2])) * np.hypot(y[..., 2], y[..., 3])


def wrap_states(surface: SurfaceModel, y: np.ndarray) -> np.ndarray:
    """Reduce positions of torus states to the fundamental domain; no-op on the half-plane."""
    if not surface.kind.is_torus:
        return y
    wrapped = y.copy()
    wrapped[..., :2] = geometry._wrap_array(surface, y[..., :2])
    return wrapped


def in_domain(surface: SurfaceModel, y: np.ndarray) -> np.ndarray:
    """Boolean mask of finite states inside the chart domain."""
    ok = np.all(np.isfinite(y), axis=-1)
    if surface.kind is SurfaceKind.HYPERBOLIC_PLANE:
        ok &= y[..., 1] > 0.0
    return ok


def advance(surface: SurfaceModel, y: np.ndarray, h, renormalize: bool = True):
    """
    One RK4 step of the flow for a batch of states.

    Returns:
        tuple: (new states, |v|_g before renormalization).
    """
    stepped = rk4(lambda z: field(surface, z), y, h)
    with np.errstate(invalid='ignore', divide='ignore'):
        raw_speed = speed(surface, stepped)
        if renormalize:
            stepped[..., 2:] = stepped[..., 2:] / raw_speed[..., None]
    return stepped, raw_speed


def vector_field(surface: SurfaceModel, state):
    """(x', v') at a state, as a pair of tangent vectors."""
    y = _as_state_array(state)
    geometry.check_domain(surface, y[..., :2])
    dy = field(surface, y)
    return TangentVector(float(dy[0]), float(dy[1])), TangentVector(float(dy[2]), float(dy[3]))


def energy(surface: SurfaceModel, state) -> float:
    """|v|_g, so that 2H = energy**2."""
    y = _as_state_array(state)
    return float(speed(surface, y))


def step(surface: SurfaceModel, state, h: float, renormalize: bool = True) -> UnitTangentState:
    """
    One RK4 step of size h.

    Raises:
        ValueError: h is not positive.
        IntegrationError: the step leaves the chart domain.
    """
    if not h > 0:
        raise ValueError("Step size must be positive")
    y = _as_state_array(state)
    stepped, _ = advance(surface, y[None, :], h, renormalize)
    if not in_domain(surface, stepped)[0]:
        raise IntegrationError("Step left the chart domain", last_state=UnitTangentState.from_array(y),
                               failure_time=float(h))
    return UnitTangentState.from_array(wrap_states(surface, stepped)[0])


def time_grid(T: float, h: float) -> np.ndarray:
    """0, h, 2h, ..., T with the last step shortened when h does not divide T."""
    n_full = int(math.floor(T / h + 1e-9))
    times = np.arange(n_full + 1) * h
    if T - times[-1] > 1e-12 * max(1.0, T):
        times = np.append(times, T)
    else:
        times[-1] = T if n_full > 0 else times[-1]
    return times


def flow(surface: SurfaceModel, theta0, T: float, h: float = DEFAULT_STEP,
         renormalize: bool = True) -> TrajectorySample:
    """
    Sample the trajectory of theta0 at 0, h, 2h, ..., T.

    Raises:
        ValueError: T or h not positive, or h > T.
        IntegrationError: the trajectory left the chart domain; ``partial`` holds
            the samples up to the failure.
    """
    if not (T > 0 and h > 0):
        raise ValueError("T and h must be positive")
    if h > T:
        raise ValueError("Step h must not exceed T")
    y = _as_state_array(theta0)
    geometry.check_domain(surface, y[:2])

    times = time_grid(T, h)
    states = np.empty((len(times), 4))
    energies = np.empty(len(times))
    states[0] = y
    energies[0] = speed(surface, y)
    current = y[None, :]
    for i in range(1, len(times)):
        stepped, raw_speed = advance(surface, current, times[i] - times[i - 1], renormalize)
        if not in_domain(surface, stepped)[0]:
            partial = TrajectorySample(times=times[:i], states=states[:i], energy=energies[:i],
                                       energy_drift=float(np.max(np.abs(energies[:i] - 1.0))),
                                       failed_at=float(times[i]))
            logger.warning(f"Trajectory left the chart domain at t={times[i]:.6g}")
            raise IntegrationError(f"Trajectory left the chart domain at t={times[i]:.6g}",
                                   last_state=UnitTangentState.from_array(states[i - 1]),
                                   failure_time=float(times[i]), partial=partial)
        current = wrap_states(surface, stepped)
        states[i] = current[0]
        energies[i] = raw_speed[0]

    drift = float(np.max(np.abs(energies - 1.0)))
    return TrajectorySample(times=times, states=states, energy=energies, energy_drift=drift)
