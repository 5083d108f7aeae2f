import numpy as np
import pytest
from hypothesis import strategies as st

from stochnls.functional_algebra import convolve, make_generator, multiply, token
from stochnls.numerics.lattice import ChiSpec, LatticeSpec


@pytest.fixture(scope="session")
def small_spec():
    """Coarse d = 1 lattice for fast numerical unit tests."""
    return LatticeSpec(d=1, T=1.0, Lx=2 * np.pi, nt=32, nx=32)


@pytest.fixture(scope="session")
def tiny_spec():
    """Small enough for a dense Q matrix (8 x 16 = 128 points)."""
    return LatticeSpec(d=1, T=1.0, Lx=2 * np.pi, nt=8, nx=16,
                       chi=ChiSpec(center_t=0.5, radius_t=0.45, radius_x=2.0))


PHI = make_generator("Phi")
PHIBAR = make_generator("PhiBar")
ONE = make_generator("One")

_leaves = st.sampled_from([PHI, PHIBAR, ONE, token("Cbar"), token("Chi")])


def _combine(children):
    return st.one_of(
        st.tuples(children, children).map(lambda ab: multiply(ab[0], ab[1])),
        st.tuples(children, children).map(lambda ab: ab[0] + ab[1]),
        st.tuples(st.booleans(), children).map(lambda bc: convolve(bc[0], bc[1])),
        st.tuples(st.integers(-3, 3), children).map(lambda sc: sc[1].scale(sc[0])),
    )


# random polynomial expressions with a handful of legs
expressions = st.recursive(_leaves, _combine, max_leaves=5)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
