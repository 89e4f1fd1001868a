import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from biharmonic_slp.geometry import multicurve_from_spec
from biharmonic_slp.kernels import KernelParams

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

BUILTINS = {
    "circle": "circle:r=1",
    "ellipse": "ellipse:a=2,b=1",
    "kite": "kite",
}


@pytest.fixture(scope="session")
def params():
    return KernelParams(1.0, 0.0)


@pytest.fixture(scope="session")
def circle():
    return multicurve_from_spec("circle:r=1")


@pytest.fixture(scope="session")
def ellipse():
    return multicurve_from_spec("ellipse:a=2,b=1")


@pytest.fixture(scope="session")
def kite():
    return multicurve_from_spec("kite")


@pytest.fixture(scope="session")
def annulus():
    return multicurve_from_spec("circle:r=1+circle:r=0.3,cx=0.2")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def smooth_data(rng, modes=4):
    """Random smooth trace pair (p0, p1) as a function of the curve parameter."""
    c = rng.normal(size=(2, 2 * modes + 1)) / (1 + np.arange(2 * modes + 1)) ** 2

    def f(t, row):
        out = np.full_like(t, c[row, 0])
        for k in range(1, modes + 1):
            out = out + c[row, 2 * k - 1] * np.cos(k * t) + c[row, 2 * k] * np.sin(k * t)
        return out

    return lambda t: (f(t, 0), f(t, 1))
