import math

import numpy as np
import numpy.testing as npt
import pytest

from app.services import geometry, magnetic_flow, variational
from app.services.geometry import make_surface
from app.utils.estimator_exceptions import DegenerateFitError


def test_flat_determinant_is_t(unit_torus):
    trace = variational.alpha_determinant_along(unit_torus, [0.1, 0.2, 0.6, 0.8], 10.0, 1e-3)
    assert trace.det_values[0] == 0.0
    npt.assert_allclose(trace.det_values, trace.times, atol=1e-9)


@pytest.mark.parametrize('s', [1.0, 2.5, -1.0])
def test_constant_field_determinant(s):
    surface = make_surface('flat_torus', 1.0, 1.0, s=s)
    trace = variational.alpha_determinant_along(surface, [0.3, 0.4, 1.0, 0.0], 10.0, 1e-3)
    npt.assert_allclose(trace.det_values, np.sin(s * trace.times) / s, atol=1e-6)


def test_determinant_is_linear_near_zero(unit_torus, half_plane, bumpy_torus):
    h = 1e-4
    for surface, point in ((unit_torus, (0.2, 0.2)), (half_plane, (0.0, 1.0)), (bumpy_torus, (0.3, 0.6))):
        theta = geometry.launch_states(surface, np.array(point), 1.1)
        trace = variational.alpha_determinant_along(surface, theta, 10 * h, h)
        assert trace.det_values[-1] / trace.times[-1] == pytest.approx(1.0, abs=1e-4)


def test_variation_starts_vertical(bumpy_torus):
    theta = geometry.launch_states(bumpy_torus, np.array([0.3, 0.6]), 0.5)
    states = variational.variational_flow(bumpy_torus, theta, 0.01, 1e-3)
    first = states[0]
    assert first.delta_x == (0.0, 0.0)
    turned = geometry.rotate90(bumpy_torus, first.base.point, first.base.velocity)
    npt.assert_allclose(first.delta_v, turned)


def _random_launch(surface, seed):
    rng = np.random.default_rng(seed)
    if surface.kind.is_torus:
        point = rng.uniform(0.0, 1.0, size=2)
    else:
        point = np.array([rng.uniform(-1.0, 1.0), rng.uniform(0.5, 2.0)])
    return point, rng.uniform(0.0, 2 * math.pi)


@pytest.mark.parametrize('name', ['unit_torus', 'magnetic_torus', 'bumpy_torus', 'half_plane'])
@pytest.mark.parametrize('launch', [0, 1])
@pytest.mark.parametrize('T', [0.5, 2.0, 5.0])
def test_determinant_matches_finite_differences(name, launch, T, request):
    surface = request.getfixturevalue(name)
    h = 1e-3
    eps = 1e-5
    x, angle = _random_launch(surface, 40 + launch)

    def end(a):
        return magnetic_flow.flow(surface, geometry.launch_states(surface, x, a), T, h).final

    base = end(angle)
    plus = end(angle + eps)
    minus = end(angle - eps)
    if surface.kind.is_torus:
        spread = np.array(geometry.displacement(surface, minus.point, plus.point))
    else:
        spread = np.array(plus.point) - np.array(minus.point)
    # d/d(angle) of the unit launch vector is i_g v, so this column is dx(T)
    expected = geometry.area_form(surface, base.point, base.velocity, spread / (2 * eps))
    trace = variational.alpha_determinant_along(surface, geometry.launch_states(surface, x, angle), T, h)
    assert trace.det_values[-1] == pytest.approx(expected, rel=1e-5, abs=1e-6)


def test_determinant_does_not_depend_on_wrapping(magnetic_torus):
    inside = variational.alpha_determinant_along(magnetic_torus, [0.5, 0.5, 1.0, 0.0], 3.0, 1e-3)
    shifted = variational.alpha_determinant_along(magnetic_torus, [1.5, -0.5, 1.0, 0.0], 3.0, 1e-3)
    npt.assert_allclose(inside.det_values, shifted.det_values, atol=1e-9)


def test_half_plane_growth_rate(half_plane):
    theta = geometry.launch_states(half_plane, np.array([0.0, 1.0]), 0.3)
    estimate = variational.log_det_growth(half_plane, theta, 20.0, 1e-3)
    assert estimate.rate == pytest.approx(1.0, abs=0.05)
    assert estimate.window == pytest.approx((10.0, 20.0))


def test_magnetic_half_plane_growth_rate():
    surface = make_surface('hyperbolic_plane', s=0.6)
    theta = geometry.launch_states(surface, np.array([0.0, 1.0]), 0.0)
    estimate = variational.log_det_growth(surface, theta, 20.0, 1e-3)
    assert estimate.rate == pytest.approx(0.8, abs=0.05)


def test_bounded_oscillation_has_no_growth(magnetic_torus):
    estimate = variational.log_det_growth(magnetic_torus, [0.0, 0.0, 1.0, 0.0], 12 * math.pi, 1e-3)
    assert abs(estimate.rate) <= 0.02
    assert estimate.n_excluded > 0


def test_all_samples_below_floor(unit_torus):
    with pytest.raises(DegenerateFitError):
        variational.log_det_growth(unit_torus, [0.0, 0.0, 1.0, 0.0], 1.0, 1e-3, floor=10.0)


def test_integrate_abs_det_checkpoints_are_nested(magnetic_torus):
    states = geometry.sample_liouville(magnetic_torus, 3, range(4))
    both, failed = variational.integrate_abs_det(magnetic_torus, states, 5.0, 1e-3, checkpoints=[2.5, 5.0])
    alone, _ = variational.integrate_abs_det(magnetic_torus, states, 2.5, 1e-3)
    assert not failed.any()
    npt.assert_allclose(both[:, 0], alone[:, 0], rtol=1e-12)
    assert np.all(both[:, 1] >= both[:, 0])
    npt.assert_allclose(both[:, 1], 3 - math.cos(5.0 - math.pi), rtol=1e-6)


def test_half_plane_jacobi_field_grows_like_sinh(half_plane):
    theta = geometry.launch_states(half_plane, np.array([0.0, 1.0]), 0.3)
    final = variational.variational_flow(half_plane, theta, 5.0, 1e-3)[-1]
    p = np.array(final.base.point)
    v = np.array(final.base.velocity)
    dx = np.array(final.delta_x)
    factor = geometry.conformal_factor(half_plane, p)
    orthogonal = dx - factor * np.dot(v, dx) * v
    assert geometry.metric_norm(half_plane, p, orthogonal) == pytest.approx(math.sinh(5.0), rel=1e-6)


def test_larmor_variation_is_a_chord(magnetic_torus):
    states = variational.variational_flow(magnetic_torus, [0.2, 0.7, 0.6, 0.8], 10.0, 1e-3)
    times = magnetic_flow.time_grid(10.0, 1e-3)
    lengths = np.array([np.hypot(*state.delta_x) for state in states])
    npt.assert_allclose(lengths, 2 * np.abs(np.sin(times / 2)), atol=1e-8)


@pytest.mark.parametrize('s', [1.0, 2.5, -1.0])
@pytest.mark.parametrize('turns', [1, 2, 3])
def test_constant_field_determinant_vanishes_after_full_turns(s, turns):
    surface = make_surface('flat_torus', 1.0, 1.0, s=s)
    T = turns * 2 * math.pi / abs(s)
    trace = variational.alpha_determinant_along(surface, [0.3, 0.4, 0.0, 1.0], T, 1e-3)
    assert trace.times[-1] == T
    assert abs(trace.det_values[-1]) < 1e-6
