"""
Counting magnetic trajectories between two points.

n_T(x, y) is the number of preimages of y under the shooting map
f(angle, t) = pi(phi_t(x, angle)) on [0, 2pi) x [t_min, T]. Roots are seeded
from a launch-angle x time grid and polished by damped Newton iterations whose
Jacobian columns are the pushed-forward unit vertical vector and gamma'(t).
"""

import logging
import math
from typing import List, Tuple

import numpy as np

from app.models.connection import ConnectionRoot, CountFlags, CountOptions, CountResult
from app.models.surface import ChartPoint, SurfaceModel
from app.services import geometry
from app.services.magnetic_flow import DEFAULT_STEP, advance
from app.services.variational import alpha_determinant, propagate
from app.utils.counting_exceptions import (
    CoincidentEndpointsError, RefinementFailedError, SingularJacobianError,
)
from app.utils.flow_exceptions import IntegrationError

logger = logging.getLogger(__name__)

SINGULAR_DET = 1e-10
MULTIPLICITY_DET = 1e-4
MAX_HALVINGS = 6
# Seeds are kept when their residual is within this multiple of the local grid spacing.
SEED_MESH_FACTOR = 1.5

RUNNING, CONVERGED, FAILED, SINGULAR = 0, 1, 2, 3


def shoot(surface: SurfaceModel, x, angle: float, t: float, h: float = DEFAULT_STEP) -> ChartPoint:
    """Endpoint pi(phi_t(x, angle)), wrapped to the fundamental domain."""
    geometry._require_torus(surface, "shoot")
    state = geometry.launch_states(surface, np.asarray(x, dtype=float)[None, :], np.array([angle]))
    end = propagate(surface, state, np.array([t]), h, with_variation=False)
    if not np.all(np.isfinite(end)):
        raise IntegrationError(f"Shooting from {tuple(x)} at angle {angle} failed before t={t}")
    return ChartPoint(float(end[0, 0]), float(end[0, 1]))


def _residuals(surface: SurfaceModel, ends: np.ndarray, ys: np.ndarray):
    """Wrapped displacement y -> f and its g-norm at y."""
    r = geometry._displacement_array(surface, ys, ends[:, :2])
    norm = np.exp(surface.lambda_field.value(ys)) * np.hypot(r[:, 0], r[:, 1])
    return r, norm


def _evaluate(surface, xs, ys, angles, ts, h):
    states = geometry.launch_states(surface, xs, angles)
    z = propagate(surface, states, ts, h, with_variation=True)
    r, res = _residuals(surface, z, ys)
    det = alpha_determinant(surface, z)
    res = np.where(np.isfinite(res), res, np.inf)
    return z, r, res, det


def newton_batch(surface: SurfaceModel, xs: np.ndarray, ys: np.ndarray, angles: np.ndarray,
                 ts: np.ndarray, opts: CountOptions):
    """
    Damped Newton on f(angle, t) = y for a batch of (x, y, guess) rows.

    Returns:
        dict: arrays ``angle``, ``t``, ``residual``, ``det``, ``status`` and ``iterations``.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1, 2)
    ys = np.asarray(ys, dtype=float).reshape(-1, 2)
    angle = np.asarray(angles, dtype=float).copy()
    t = np.asarray(ts, dtype=float).copy()
    n = len(angle)
    status = np.full(n, RUNNING)
    iterations = np.zeros(n, dtype=int)
    if n == 0:
        return {'angle': angle, 't': t, 'residual': np.empty(0), 'det': np.empty(0),
                'status': status, 'iterations': iterations}

    z, r, res, det = _evaluate(surface, xs, ys, angle, t, opts.step)
    t_cap = 2.0 * max(float(np.max(t)), 1.0)
    for it in range(opts.max_newton + 1):
        running = status == RUNNING
        broken = running & ~np.isfinite(det)
        status[broken] = FAILED
        singular = running & ~broken & (np.abs(det) < SINGULAR_DET)
        status[singular] = SINGULAR
        status[running & ~broken & ~singular & (res < opts.tol_pos)] = CONVERGED
        active = np.flatnonzero(status == RUNNING)
        if active.size == 0:
            break
        if it == opts.max_newton:
            status[active] = FAILED
            break
        iterations[active] += 1

        dx0, dx1 = z[active, 4], z[active, 5]
        v0, v1 = z[active, 2], z[active, 3]
        r0, r1 = r[active, 0], r[active, 1]
        chart_det = dx0 * v1 - dx1 * v0
        step_angle = -(v1 * r0 - v0 * r1) / chart_det
        step_t = -(-dx1 * r0 + dx0 * r1) / chart_det

        pending = active
        scale = np.ones(active.size)
        for _ in range(MAX_HALVINGS + 1):
            trial_angle = angle[pending] + scale * step_angle
            trial_t = t[pending] + scale * step_t
            usable = (trial_t > 0.0) & (trial_t <= t_cap) & np.isfinite(trial_angle)
            z_try, r_try, res_try, det_try = _evaluate(
                surface, xs[pending], ys[pending], np.where(usable, trial_angle, 0.0),
                np.where(usable, trial_t, 1.0), opts.step)
            better = usable & (res_try < res[pending])
            accepted = pending[better]
            angle[accepted] = trial_angle[better]
            t[accepted] = trial_t[better]
            z[accepted], r[accepted], res[accepted], det[accepted] = (
                z_try[better], r_try[better], res_try[better], det_try[better])
            keep = ~better
            pending = pending[keep]
            step_angle = step_angle[keep]
            step_t = step_t[keep]
            scale = scale[keep] * 0.5
            if pending.size == 0:
                break
        status[pending] = FAILED

    return {'angle': np.mod(angle, 2.0 * math.pi), 't': t, 'residual': res, 'det': det,
            'status': status, 'iterations': iterations}


def refine_root(surface: SurfaceModel, x, y, guess: Tuple[float, float], opts: CountOptions) -> ConnectionRoot:
    """
    Polish one (angle, t) guess into a connecting trajectory.

    Raises:
        SingularJacobianError: the alpha-determinant vanished at an iterate.
        RefinementFailedError: the residual did not drop below tol_pos in max_newton steps.
    """
    geometry._require_torus(surface, "refine_root")
    out = newton_batch(surface, np.asarray(x, dtype=float)[None, :], np.asarray(y, dtype=float)[None, :],
                       np.array([guess[0]]), np.array([guess[1]]), opts)
    status = int(out['status'][0])
    if status == SINGULAR:
        raise SingularJacobianError(
            f"Singular shooting Jacobian at angle={out['angle'][0]:.6g}, t={out['t'][0]:.6g} "
            f"(|det|={abs(out['det'][0]):.3g})")
    if status != CONVERGED:
        raise RefinementFailedError(
            f"Newton did not reach tol_pos={opts.tol_pos} from guess {tuple(guess)} "
            f"(residual {out['residual'][0]:.3g})")
    logger.debug(f"Root refined in {int(out['iterations'][0])} iterations")
    return ConnectionRoot(launch_angle=float(out['angle'][0]), arrival_time=float(out['t'][0]),
                          residual=float(out['residual'][0]), jacobian_det=float(out['det'][0]))


def scan_grid(surface: SurfaceModel, xs: np.ndarray, T: float, opts: CountOptions):
    """
    Endpoints of the launch grid for a batch of start points.

    Returns:
        tuple: (angles (A,), time nodes (M,), positions (B, A, M, 2)).
    """
    xs = np.asarray(xs, dtype=float).reshape(-1, 2)
    angles = 2.0 * math.pi * np.arange(opts.n_angle) / opts.n_angle
    nodes = np.linspace(opts.t_min, T, opts.n_time)
    y = geometry.launch_states(surface, xs[:, None, :], angles[None, :])
    positions = np.empty(y.shape[:2] + (len(nodes), 2))
    current = 0.0
    for j, node in enumerate(nodes):
        span = node - current
        if span > 0.0:
            substeps = max(1, int(math.ceil(span / opts.scan_step - 1e-9)))
            for _ in range(substeps):
                y, _ = advance(surface, y, span / substeps)
        positions[:, :, j, :] = y[..., :2]
        current = node
    return angles, nodes, positions


def _g_norm(surface: SurfaceModel, at: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return np.exp(surface.lambda_field.value(at)) * np.hypot(vectors[..., 0], vectors[..., 1])


def _seed_cells(surface: SurfaceModel, positions: np.ndarray, y: np.ndarray):
    """
    Residual grid, seed mask (local minima within the local mesh size) and the
    per-cell acceptance threshold for one start point. ``positions`` is (A, M, 2).
    """
    y_grid = np.broadcast_to(y, positions.shape)
    residual = _g_norm(surface, y, geometry._displacement_array(surface, y_grid, positions))
    step_angle = _g_norm(surface, y, geometry._displacement_array(
        surface, positions, np.roll(positions, -1, axis=0)))
    mesh = np.maximum(step_angle, np.roll(step_angle, 1, axis=0))
    if positions.shape[1] > 1:
        step_time = _g_norm(surface, y, geometry._displacement_array(
            surface, positions[:, :-1], positions[:, 1:]))
        mesh[:, :-1] = np.maximum(mesh[:, :-1], step_time)
        mesh[:, 1:] = np.maximum(mesh[:, 1:], step_time)
    threshold = SEED_MESH_FACTOR * mesh

    padded = np.pad(residual, ((0, 0), (1, 1)), constant_values=np.inf)
    local_min = np.ones(residual.shape, dtype=bool)
    for da in (-1, 0, 1):
        rolled = np.roll(padded, da, axis=0)
        for dt in (-1, 0, 1):
            if da == 0 and dt == 0:
                continue
            neighbour = rolled[:, 1 + dt: 1 + dt + residual.shape[1]]
            local_min &= residual <= neighbour
    return residual, local_min & (residual <= threshold), threshold


def _continuum_candidates(residual: np.ndarray, threshold: np.ndarray, n_angle: int):
    """
    (angle, time) cells that are local minima in time on a node shared by at
    least a quarter of all launch angles.
    """
    padded = np.pad(residual, ((0, 0), (1, 1)), constant_values=np.inf)
    minimum = (residual <= padded[:, :-2]) & (residual <= padded[:, 2:]) & (residual <= threshold)
    counts = np.count_nonzero(minimum, axis=0)
    windowed = counts + np.concatenate([[0], counts[:-1]]) + np.concatenate([counts[1:], [0]])
    hot = windowed >= n_angle / 4.0
    if not np.any(hot):
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    near = hot | np.concatenate([[False], hot[:-1]]) | np.concatenate([hot[1:], [False]])
    return np.nonzero(minimum & near[None, :])


def _dedupe(angle: np.ndarray, t: np.ndarray, opts: CountOptions) -> np.ndarray:
    """Indices of distinct roots, ordered by (angle, t)."""
    order = np.lexsort((t, angle))
    kept: List[int] = []
    for index in order:
        if kept:
            gap = np.abs(angle[kept] - angle[index])
            gap = np.minimum(gap, 2.0 * math.pi - gap)
            if np.any((gap <= opts.dedupe_angle) & (np.abs(t[kept] - t[index]) <= opts.dedupe_time)):
                continue
        kept.append(int(index))
    return np.array(kept, dtype=int)


def _is_continuum(angle: np.ndarray, t: np.ndarray, opts: CountOptions) -> bool:
    """At least n_angle/4 distinct angles arriving at a common time."""
    if angle.size < opts.n_angle / 4.0:
        return False
    order = np.argsort(t)
    t_sorted = t[order]
    for start in range(len(t_sorted)):
        stop = np.searchsorted(t_sorted, t_sorted[start] + opts.dedupe_time, side='right')
        if stop - start >= opts.n_angle / 4.0:
            group = angle[order[start:stop]]
            distinct = _dedupe(group, np.zeros_like(group), opts)
            if distinct.size >= opts.n_angle / 4.0:
                return True
    return False


def count_connections_batch(surface: SurfaceModel, xs: np.ndarray, ys: np.ndarray, T: float,
                            opts: CountOptions) -> List[CountResult]:
    """Count connections for several (x, y) pairs with one grid scan and one Newton pass."""
    geometry._require_torus(surface, "count_connections")
    xs = geometry._wrap_array(surface, np.asarray(xs, dtype=float).reshape(-1, 2))
    ys = geometry._wrap_array(surface, np.asarray(ys, dtype=float).reshape(-1, 2))
    opts = opts.resolved(T)
    if T < opts.t_min:
        return [CountResult(count=0) for _ in range(len(xs))]

    gaps = _g_norm(surface, ys, geometry._displacement_array(surface, xs, ys))
    coincident = gaps < opts.tol_pos
    if np.any(coincident) and not opts.allow_coincident:
        raise CoincidentEndpointsError(
            "x and y are the same torus point: every return of a constant-field orbit is a "
            "continuum-degenerate target; set allow_coincident to count anyway")

    logger.info(f"Scanning {opts.n_angle}x{opts.n_time} launch grid for {len(xs)} pair(s), T={T}")
    angles, nodes, positions = scan_grid(surface, xs, T, opts)

    seed_pair, seed_angle, seed_t = [], [], []
    for b in range(len(xs)):
        residual, seeds, threshold = _seed_cells(surface, positions[b], ys[b])
        ia, it = np.nonzero(seeds)
        seed_pair.append(np.full(ia.size, b))
        seed_angle.append(angles[ia])
        seed_t.append(nodes[it])
        extra_angle, extra_time = _continuum_candidates(residual, threshold, opts.n_angle)
        seed_pair.append(np.full(extra_angle.size, b))
        seed_angle.append(angles[extra_angle])
        seed_t.append(nodes[extra_time])

    pair = np.concatenate(seed_pair)
    out = newton_batch(surface, xs[pair], ys[pair], np.concatenate(seed_angle), np.concatenate(seed_t), opts)
    logger.info(f"Refined {pair.size} seeds: "
                f"{int(np.count_nonzero(out['status'] == CONVERGED))} converged, "
                f"{int(np.count_nonzero(out['status'] == SINGULAR))} singular")

    results = []
    for b in range(len(xs)):
        mine = pair == b
        converged = mine & (out['status'] == CONVERGED)
        in_range = converged & (out['t'] >= opts.t_min) & (out['t'] <= T)
        flags = CountFlags(
            discarded_cells=int(np.count_nonzero(mine & (out['status'] == FAILED))),
            singular_cells=int(np.count_nonzero(mine & (out['status'] == SINGULAR))),
        )
        # singular iterates that reached y are arrivals too
        landed = mine & ((out['status'] == CONVERGED) | (out['status'] == SINGULAR)) \
            & (out['residual'] < opts.tol_pos) & (out['t'] >= opts.t_min)
        flags.continuum_degenerate = _is_continuum(out['angle'][landed], out['t'][landed], opts)
        if flags.continuum_degenerate:
            logger.warning(f"Continuum degeneracy for pair x={tuple(xs[b])}, y={tuple(ys[b])}")

        idx = np.flatnonzero(in_range)
        distinct = idx[_dedupe(out['angle'][idx], out['t'][idx], opts)] if idx.size else idx
        roots = [ConnectionRoot(launch_angle=float(out['angle'][k]), arrival_time=float(out['t'][k]),
                                residual=float(out['residual'][k]), jacobian_det=float(out['det'][k]))
                 for k in distinct]
        flags.suspected_multiplicity = any(abs(root.jacobian_det) < MULTIPLICITY_DET for root in roots)
        results.append(CountResult(count=len(roots), roots=roots, flags=flags))
    return results


def count_connections(surface: SurfaceModel, x, y, T: float, opts: CountOptions) -> CountResult:
    """
    n_T(x, y) with its roots and reliability flags.

    Raises:
        CoincidentEndpointsError: x and y coincide and ``opts.allow_coincident`` is off.
    """
    return count_connections_batch(surface, np.asarray(x, dtype=float)[None, :],
                                   np.asarray(y, dtype=float)[None, :], T, opts)[0]
