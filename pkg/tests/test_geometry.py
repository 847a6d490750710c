import math

import numpy as np
import numpy.testing as npt
import pytest

from app.extensions import substream
from app.models.surface import ChartPoint, TangentVector
from app.services import geometry
from app.services.geometry import make_surface
from app.utils.geometry_exceptions import ChartDomainError, GeometryError, UnsupportedOperationError


def test_conformal_factor(unit_torus, half_plane):
    assert geometry.conformal_factor(unit_torus, (0.3, 0.7)) == pytest.approx(1.0)
    assert geometry.conformal_factor(half_plane, (0.0, 2.0)) == pytest.approx(0.25)
    doubled = make_surface('conformal_torus', 1.0, 1.0, lambda_expr='0.6931471805599453')
    assert geometry.conformal_factor(doubled, (0.1, 0.9)) == pytest.approx(4.0)


def test_conformal_factor_outside_half_plane(half_plane):
    with pytest.raises(ChartDomainError):
        geometry.conformal_factor(half_plane, (0.0, -1.0))


def test_christoffel_vanishes_for_constant_lambda(unit_torus):
    doubled = make_surface('conformal_torus', 1.0, 1.0, lambda_expr='0.5')
    npt.assert_array_equal(geometry.christoffel(unit_torus, (0.2, 0.4)), np.zeros((2, 2, 2)))
    npt.assert_array_equal(geometry.christoffel(doubled, (0.2, 0.4)), np.zeros((2, 2, 2)))


def test_christoffel_half_plane(half_plane):
    gamma = geometry.christoffel(half_plane, (0.0, 2.0))
    # lambda = -log(v): Gamma^u_uv = -1/v, Gamma^v_uu = 1/v, Gamma^v_vv = -1/v
    assert gamma[0, 0, 1] == pytest.approx(-0.5)
    assert gamma[1, 0, 0] == pytest.approx(0.5)
    assert gamma[1, 1, 1] == pytest.approx(-0.5)


def test_rotate90(unit_torus, half_plane):
    assert geometry.rotate90(unit_torus, (0, 0), (1, 0)) == TangentVector(0.0, 1.0)
    w = (1.0, 0.0)
    turned = geometry.rotate90(half_plane, (0.0, 2.0), w)
    assert turned == TangentVector(0.0, 1.0)
    assert geometry.metric_norm(half_plane, (0.0, 2.0), w) == pytest.approx(0.5)
    assert geometry.metric_norm(half_plane, (0.0, 2.0), turned) == pytest.approx(0.5)
    twice = geometry.rotate90(half_plane, (0.0, 2.0), turned)
    npt.assert_allclose(twice, (-1.0, 0.0))


def test_rotation_is_positive_and_isometric(bumpy_torus):
    p = (0.3, 0.8)
    w = np.array([0.4, -1.3])
    turned = geometry.rotate90(bumpy_torus, p, w)
    norm = geometry.metric_norm(bumpy_torus, p, w)
    assert geometry.metric_norm(bumpy_torus, p, turned) == pytest.approx(norm)
    assert geometry.area_form(bumpy_torus, p, w, turned) == pytest.approx(norm ** 2)


def test_wrap():
    unit = make_surface('flat_torus', 1.0, 1.0)
    assert geometry.wrap(unit, (1.25, -0.5)) == ChartPoint(0.25, 0.5)
    assert geometry.wrap(unit, (0.0, 0.999)) == ChartPoint(0.0, 0.999)
    wide = make_surface('flat_torus', 2.0, 3.0)
    wrapped = geometry.wrap(wide, (-0.5, 3.5))
    npt.assert_allclose(wrapped, (1.5, 0.5))


def test_wrap_unsupported_on_half_plane(half_plane):
    with pytest.raises(UnsupportedOperationError):
        geometry.wrap(half_plane, (0.0, 1.0))
    with pytest.raises(UnsupportedOperationError):
        geometry.displacement(half_plane, (0.0, 1.0), (1.0, 1.0))


def test_displacement(unit_torus):
    npt.assert_allclose(geometry.displacement(unit_torus, (0.1, 0.1), (0.9, 0.1)), (-0.2, 0.0), atol=1e-15)
    assert geometry.displacement(unit_torus, (0.3, 0.3), (0.3, 0.3)) == TangentVector(0.0, 0.0)
    assert geometry.displacement(unit_torus, (0.0, 0.0), (0.5, 0.5)) == TangentVector(0.5, 0.5)


def test_area():
    assert geometry.area(make_surface('flat_torus', 1.0, 1.0)) == pytest.approx(1.0)
    assert geometry.area(make_surface('flat_torus', 2.0, 3.0)) == pytest.approx(6.0)
    doubled = make_surface('conformal_torus', 1.0, 1.0, lambda_expr='0.6931471805599453')
    assert geometry.area(doubled) == pytest.approx(4.0)


def test_area_by_quadrature():
    # exp(2*0.1*sin(2*pi*u)) integrates to I0(0.2) over a period
    bump = make_surface('conformal_torus', 1.0, 1.0, lambda_expr='0.1*sin(2*pi*u)')
    assert geometry.area(bump) == pytest.approx(1.0100250277795, rel=1e-10)
    assert geometry.liouville_volume(bump) == pytest.approx(2 * math.pi * geometry.area(bump))


def test_area_unsupported_on_half_plane(half_plane):
    with pytest.raises(UnsupportedOperationError):
        geometry.area(half_plane)


def test_make_surface_rules():
    with pytest.raises(GeometryError):
        make_surface('flat_torus', 1.0, 1.0, lambda_expr='0.1*sin(2*pi*u)')
    with pytest.raises(GeometryError):
        make_surface('conformal_torus', 1.0, 1.0)
    with pytest.raises(GeometryError):
        make_surface('conformal_torus', 1.0, 1.0, lambda_expr='0.1*sin(u)')
    with pytest.raises(GeometryError):
        make_surface('flat_torus', 0.0, 1.0)
    with pytest.raises(GeometryError):
        make_surface('sphere', 1.0, 1.0)


def test_sampled_tangents_are_unit_and_deterministic(bumpy_torus):
    first = geometry.sample_liouville(bumpy_torus, 7, range(20))
    again = geometry.sample_liouville(bumpy_torus, 7, [5])
    npt.assert_array_equal(first[5], again[0])
    npt.assert_allclose(geometry.metric_norm(bumpy_torus, first[:, :2], first[:, 2:]), 1.0, rtol=1e-12)
    assert np.all((first[:, :2] >= 0.0) & (first[:, :2] < 1.0))


def test_sampled_points_follow_area_density():
    from scipy import stats

    bump = make_surface('conformal_torus', 1.0, 1.0, lambda_expr='0.5*cos(2*pi*u)')
    rng = substream(11, 0)
    points = np.array([geometry.sample_area_point(bump, rng) for _ in range(4000)])
    edges = np.linspace(0.0, 1.0, 11)
    observed, _ = np.histogram(points[:, 0], bins=edges)
    fine = np.linspace(0.0, 1.0, 10001)
    density = np.exp(np.cos(2 * math.pi * fine))
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(fine))])
    expected = np.diff(np.interp(edges, fine, cumulative)) / cumulative[-1] * len(points)
    _, p_value = stats.chisquare(observed, expected)
    assert p_value > 0.001


def _metric(surface, p):
    return geometry.conformal_factor(surface, p) * np.eye(2)


def _koszul(surface, p, eps=1e-5):
    """Christoffel symbols from centred differences of g_ij."""
    p = np.asarray(p, dtype=float)
    dg = np.empty((2, 2, 2))
    for m in range(2):
        step = np.zeros(2)
        step[m] = eps
        dg[m] = (_metric(surface, p + step) - _metric(surface, p - step)) / (2 * eps)
    inverse = np.linalg.inv(_metric(surface, p))
    first_kind = 0.5 * (np.einsum('ijl->lij', dg) + np.einsum('jil->lij', dg) - dg)
    return np.einsum('kl,lij->kij', inverse, first_kind)


@pytest.mark.parametrize('name', ['unit_torus', 'bumpy_torus', 'half_plane'])
def test_christoffel_matches_finite_differences(name, request):
    surface = request.getfixturevalue(name)
    rng = np.random.default_rng(17)
    for _ in range(10):
        if surface.kind.is_torus:
            p = rng.uniform(0.0, 1.0, size=2)
        else:
            p = np.array([rng.uniform(-2.0, 2.0), rng.uniform(0.5, 3.0)])
        npt.assert_allclose(geometry.christoffel(surface, p), _koszul(surface, p), atol=1e-6)


def test_wrap_is_idempotent_and_displacement_is_periodic():
    wide = make_surface('flat_torus', 2.0, 3.0)
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = rng.uniform(-10.0, 10.0, size=2)
        q = rng.uniform(-10.0, 10.0, size=2)
        once = geometry.wrap(wide, p)
        assert geometry.wrap(wide, once) == once
        base = geometry.displacement(wide, p, q)
        m, n = rng.integers(-4, 5, size=2)
        shifted = q + np.array([m * wide.Lx, n * wide.Ly])
        npt.assert_allclose(geometry.displacement(wide, p, shifted), base, atol=1e-12)


def test_flat_torus_samples_are_uniform_in_u():
    wide = make_surface('flat_torus', 2.0, 3.0)
    n = 100000
    samples = geometry.sample_liouville(wide, 21, range(n))
    sigma = wide.Lx / math.sqrt(12.0)
    assert abs(np.mean(samples[:, 0]) - 0.5 * wide.Lx) <= 4 * sigma / math.sqrt(n)
    assert abs(np.mean(samples[:, 1]) - 0.5 * wide.Ly) <= 4 * (wide.Ly / math.sqrt(12.0)) / math.sqrt(n)
