import pytest

from app import create_app
from app.config import TestingConfig
from app.services.geometry import make_surface


@pytest.fixture
def app():
    return create_app(TestingConfig)


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def unit_torus():
    return make_surface('flat_torus', 1.0, 1.0, s=0.0)


@pytest.fixture
def magnetic_torus():
    return make_surface('flat_torus', 1.0, 1.0, s=1.0)


@pytest.fixture
def large_magnetic_torus():
    return make_surface('flat_torus', 10.0, 10.0, s=1.0)


@pytest.fixture
def half_plane():
    return make_surface('hyperbolic_plane', s=0.0)


@pytest.fixture
def bumpy_torus():
    return make_surface('conformal_torus', 1.0, 1.0, lambda_expr='0.1*sin(2*pi*u)*cos(2*pi*v)',
                        b_expr='1+0.5*sin(2*pi*v)', s=0.7)


@pytest.fixture
def config_file(tmp_path):
    """Write a configuration document and return its path."""
    def write(text, name='run.cfg'):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write
