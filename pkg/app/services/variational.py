"""
Linearized magnetic flow and the alpha-determinant.

The variation (dx, dv) of a trajectory obeys the exact Jacobian of the vector
field. Starting from the unit vertical vector (0, i_g v) it gives
d(pi o phi_t) on the vertical line; the flow direction maps to gamma'(t), so

    det(t) = dA_g(gamma'(t), dx(t))

is the determinant of d(pi o phi_t) restricted to alpha(theta) with the
domain basis {unit vertical, X} taken as orthonormal.
"""

import logging
from typing import List

import numpy as np

from app.models.estimate import GrowthEstimate
from app.models.state import DeterminantTrace, TrajectorySample, UnitTangentState, VariationalState
from app.models.surface import SurfaceModel, TangentVector
from app.services import geometry
from app.services.magnetic_flow import (
    DEFAULT_STEP, acceleration, advance, in_domain, rk4, speed, time_grid, wrap_states,
)
from app.utils.estimator_exceptions import DegenerateFitError
from app.utils.flow_exceptions import IntegrationError

logger = logging.getLogger(__name__)

# |det| below this is left out of log fits.
FIT_FLOOR = 1e-8

_ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


def jacobian_blocks(surface: SurfaceModel, x: np.ndarray, v: np.ndarray):
    """
    Partial derivatives of the acceleration, (d a / d x, d a / d v), as [..., 2, 2].

    For a = -2 v (g.v) + |v|^2 g + s b R v with g = grad(lambda), H its Hessian:
        da/dv = -2 (g.v) I - 2 v g^T + 2 g v^T + s b R
        da/dx = -2 v (H v)^T + |v|^2 H + s (R v) grad(b)^T
    """
    grad = surface.lambda_field.gradient(x)
    hess = surface.lambda_field.hessian(x)
    b = surface.b_field.value(x)
    grad_b = surface.b_field.gradient(x)
    grad_dot_v = np.sum(grad * v, axis=-1)[..., None, None]
    speed_sq = np.sum(v * v, axis=-1)[..., None, None]
    rotated = v @ _ROTATION.T
    hv = np.einsum('...ij,...j->...i', hess, v)

    a_v = (-2.0 * grad_dot_v * np.eye(2)
           - 2.0 * np.einsum('...i,...j->...ij', v, grad)
           + 2.0 * np.einsum('...i,...j->...ij', grad, v)
           + surface.s * b[..., None, None] * _ROTATION)
    a_x = (-2.0 * np.einsum('...i,...j->...ij', v, hv)
           + speed_sq * hess
           + surface.s * np.einsum('...i,...j->...ij', rotated, grad_b))
    return a_x, a_v


def augmented_field(surface: SurfaceModel, z: np.ndarray) -> np.ndarray:
    """Vector field of (x, v, dx, dv) rows: the flow together with its linearization."""
    x, v, dx, dv = z[..., 0:2], z[..., 2:4], z[..., 4:6], z[..., 6:8]
    a_x, a_v = jacobian_blocks(surface, x, v)
    ddv = np.einsum('...ij,...j->...i', a_x, dx) + np.einsum('...ij,...j->...i', a_v, dv)
    return np.concatenate([v, acceleration(surface, x, v), dv, ddv], axis=-1)


def initial_variation(states: np.ndarray) -> np.ndarray:
    """Append the unit vertical variation (dx, dv) = (0, i_g v) to state rows."""
    states = np.asarray(states, dtype=float)
    dv = states[..., 2:4] @ _ROTATION.T
    return np.concatenate([states, np.zeros_like(dv), dv], axis=-1)


def advance_variational(surface: SurfaceModel, z: np.ndarray, h, renormalize: bool = True):
    """One RK4 step of the augmented system; returns (new rows, |v|_g before renormalization)."""
    stepped = rk4(lambda w: augmented_field(surface, w), z, h)
    with np.errstate(invalid='ignore', divide='ignore'):
        raw_speed = speed(surface, stepped[..., :4])
        if renormalize:
            stepped[..., 2:4] = stepped[..., 2:4] / raw_speed[..., None]
    return stepped, raw_speed


def alpha_determinant(surface: SurfaceModel, z: np.ndarray) -> np.ndarray:
    """dA_g(gamma', dx) for augmented rows."""
    x, v, dx = z[..., 0:2], z[..., 2:4], z[..., 4:6]
    cross = v[..., 0] * dx[..., 1] - v[..., 1] * dx[..., 0]
    return np.exp(2.0 * surface.lambda_field.value(x)) * cross


def _integrate(surface: SurfaceModel, theta0, T: float, h: float, renormalize: bool):
    if not (T > 0 and h > 0):
        raise ValueError("T and h must be positive")
    if h > T:
        raise ValueError("Step h must not exceed T")
    y = theta0.as_array() if isinstance(theta0, UnitTangentState) else np.asarray(theta0, dtype=float)
    geometry.check_domain(surface, y[:2])
    times = time_grid(T, h)
    rows = np.empty((len(times), 8))
    energies = np.empty(len(times))
    rows[0] = initial_variation(y)
    energies[0] = speed(surface, y)
    current = rows[0][None, :]
    for i in range(1, len(times)):
        stepped, raw_speed = advance_variational(surface, current, times[i] - times[i - 1], renormalize)
        if not in_domain(surface, stepped[:, :4])[0] or not np.all(np.isfinite(stepped)):
            partial = TrajectorySample(times=times[:i], states=rows[:i, :4], energy=energies[:i],
                                       energy_drift=float(np.max(np.abs(energies[:i] - 1.0))),
                                       failed_at=float(times[i]))
            raise IntegrationError(f"Variational trajectory left the chart domain at t={times[i]:.6g}",
                                   last_state=UnitTangentState.from_array(rows[i - 1, :4]),
                                   failure_time=float(times[i]), partial=partial)
        current = stepped
        current[:, :4] = wrap_states(surface, stepped[:, :4])
        rows[i] = current[0]
        energies[i] = raw_speed[0]
    trajectory = TrajectorySample(times=times, states=rows[:, :4].copy(), energy=energies,
                                  energy_drift=float(np.max(np.abs(energies - 1.0))))
    return times, rows, trajectory


def variational_flow(surface: SurfaceModel, theta0, T: float, h: float = DEFAULT_STEP,
                     renormalize: bool = True) -> List[VariationalState]:
    """The pushed-forward unit vertical vector at every step of the trajectory of theta0."""
    _, rows, _ = _integrate(surface, theta0, T, h, renormalize)
    return [
        VariationalState(base=UnitTangentState.from_array(row[:4]),
                         delta_x=TangentVector(float(row[4]), float(row[5])),
                         delta_v=TangentVector(float(row[6]), float(row[7])))
        for row in rows
    ]


def alpha_determinant_along(surface: SurfaceModel, theta0, T: float, h: float = DEFAULT_STEP,
                            renormalize: bool = True) -> DeterminantTrace:
    """Signed alpha-determinant at every integration step of [0, T]."""
    times, rows, trajectory = _integrate(surface, theta0, T, h, renormalize)
    det = alpha_determinant(surface, rows)
    det[0] = 0.0
    return DeterminantTrace(times=times, det_values=det, trajectory=trajectory)


def log_det_growth(surface: SurfaceModel, theta0, T: float, h: float = DEFAULT_STEP,
                   window_fraction: float = 0.5, floor: float = FIT_FLOOR) -> GrowthEstimate:
    """
    Exponential growth rate of |det(t)| fitted over the tail window of [0, T].

    Samples with |det| below ``floor`` are excluded and counted in ``n_excluded``.

    Raises:
        DegenerateFitError: every window sample is below the floor.
    """
    from app.services.estimators import growth_rate

    trace = alpha_determinant_along(surface, theta0, T, h)
    return growth_from_trace(trace, window_fraction, floor, growth_rate)


def growth_from_trace(trace: DeterminantTrace, window_fraction: float, floor: float, fit) -> GrowthEstimate:
    times = trace.times
    lo = times[-1] - window_fraction * (times[-1] - times[0])
    in_window = times >= lo
    magnitude = trace.abs_values
    usable = in_window & (magnitude >= floor)
    n_excluded = int(np.count_nonzero(in_window & ~usable))
    if not np.any(usable):
        raise DegenerateFitError(f"All {int(np.count_nonzero(in_window))} window samples have |det| below {floor}")
    if n_excluded:
        logger.warning(f"Excluded {n_excluded} samples with |det| < {floor} from the growth fit")
    series = list(zip(times[usable], magnitude[usable]))
    estimate = fit(series, window_fraction=1.0)
    estimate.window = (float(lo), float(times[-1]))
    estimate.n_excluded = n_excluded
    return estimate


def propagate(surface: SurfaceModel, states: np.ndarray, t: np.ndarray, h: float,
              with_variation: bool = True, renormalize: bool = True) -> np.ndarray:
    """
    Integrate a batch of launches, each to its own time t[i] in ceil(t[i] / h)
    uniform substeps, so a row gives the same endpoint whatever batch it is in.

    Returns:
        np.ndarray: final rows, (x, v, dx, dv) when ``with_variation`` else (x, v);
        rows that failed are NaN. Torus positions are wrapped.
    """
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    t = np.broadcast_to(np.asarray(t, dtype=float), (len(states),))
    if len(states) == 0:
        return np.empty((0, 8 if with_variation else 4))
    n_steps = np.maximum(1, np.ceil(t / h - 1e-9)).astype(int)
    sub = t / n_steps
    z = initial_variation(states) if with_variation else states.copy()
    for k in range(int(np.max(n_steps))):
        active = k < n_steps
        if with_variation:
            stepped, _ = advance_variational(surface, z, np.where(active, sub, 0.0), renormalize)
        else:
            stepped, _ = advance(surface, z, np.where(active, sub, 0.0), renormalize)
        z = np.where(active[:, None], stepped, z)
        bad = ~in_domain(surface, z[:, :4])
        if np.any(bad):
            z[bad] = np.nan
    z[:, :4] = wrap_states(surface, z[:, :4])
    return z


def integrate_abs_det(surface: SurfaceModel, states: np.ndarray, T: float, h: float,
                      checkpoints=None, renormalize: bool = True):
    """
    Trapezoid integral of |det| over [0, c] for each checkpoint c, for a batch of launches.

    The step grid is 0, h, 2h, ... with every checkpoint inserted, so values at a
    checkpoint do not depend on the other checkpoints requested.

    Returns:
        tuple: (integrals of shape (n, len(checkpoints)), boolean failed mask of shape (n,)).
    """
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    checkpoints = np.atleast_1d(np.asarray(checkpoints if checkpoints is not None else [T], dtype=float))
    grid = np.union1d(time_grid(T, h) if T > 0 else np.array([0.0]), checkpoints)
    grid = grid[grid <= T + 1e-12]
    z = initial_variation(states)
    total = np.zeros(len(states))
    previous = np.zeros(len(states))
    failed = np.zeros(len(states), dtype=bool)
    out = np.zeros((len(states), len(checkpoints)))
    checkpoint_index = {float(c): j for j, c in enumerate(checkpoints)}
    for j, c in enumerate(checkpoints):
        if c <= 0.0:
            out[:, j] = 0.0
    for i in range(1, len(grid)):
        dt = grid[i] - grid[i - 1]
        if dt <= 0.0:
            continue
        z, _ = advance_variational(surface, z, dt, renormalize)
        bad = ~in_domain(surface, z[:, :4]) | ~np.all(np.isfinite(z), axis=-1)
        if np.any(bad & ~failed):
            logger.warning(f"{int(np.count_nonzero(bad & ~failed))} samples failed at t={grid[i]:.6g}")
        failed |= bad
        z[failed] = 0.0
        current = np.abs(alpha_determinant(surface, z))
        total += 0.5 * dt * (previous + current)
        previous = current
        j = checkpoint_index.get(float(grid[i]))
        if j is not None:
            out[:, j] = total
    out[failed] = np.nan
    return out, failed


def alpha_determinant_batch(surface: SurfaceModel, states: np.ndarray, T: float, h: float = DEFAULT_STEP,
                            renormalize: bool = True):
    """
    Signed det(t) for several launches on the common grid 0, h, ..., T.

    Returns:
        tuple: (times (m,), det (n, m), failed mask (n,)); failed rows are NaN
        from the failure onwards.
    """
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    geometry.check_domain(surface, states[:, :2])
    times = time_grid(T, h)
    det = np.zeros((len(states), len(times)))
    failed = np.zeros(len(states), dtype=bool)
    z = initial_variation(states)
    for i in range(1, len(times)):
        z, _ = advance_variational(surface, z, times[i] - times[i - 1], renormalize)
        bad = ~in_domain(surface, z[:, :4]) | ~np.all(np.isfinite(z), axis=-1)
        failed |= bad
        z[failed] = np.nan
        det[:, i] = alpha_determinant(surface, z)
    return times, det, failed
