import numpy as np
import pytest
from hypothesis import strategies as st

from sdida.controllers import DEFAULT_KAPPA_DI
from sdida.simkit import NOMINAL_INERTIA


@pytest.fixture
def M():
    return NOMINAL_INERTIA.copy()


@pytest.fixture
def kappa():
    return DEFAULT_KAPPA_DI.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit(rng, n=None):
    shape = (4,) if n is None else (n, 4)
    q = rng.normal(size=shape)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def random_state(rng, omega_scale=0.5):
    return np.concatenate([random_unit(rng), omega_scale * rng.normal(size=3)])


finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)
quat = (
    st.tuples(finite, finite, finite, finite)
    .filter(lambda t: np.linalg.norm(t) > 1e-2)
    .map(lambda t: np.array(t) / np.linalg.norm(t))
)
state = st.tuples(quat, vec3).map(lambda qw: np.concatenate([qw[0], 0.3 * qw[1]]))


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
