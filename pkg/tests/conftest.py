import numpy as np
import pytest

from causalbounds import fixtures
from causalbounds.polytope import GridSpec, build_pocb_constraints


@pytest.fixture(scope="session")
def pocb():
    return fixtures.pocb_polytope()


@pytest.fixture(scope="session")
def pocb_free():
    """Built-in instance without the positivity floor."""
    return fixtures.pocb_polytope(kappa=0.0)


def random_pocb(rng, shape=(2, 2, 2, 2), kappa=0.0, conc=5.0):
    grid = GridSpec(*shape)
    m_ayw = rng.dirichlet(np.full(grid.n_ayw, conc))
    m_u = rng.dirichlet(np.full(grid.n_u, conc))
    return build_pocb_constraints(grid, m_ayw, m_u, kappa=kappa)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.LINES):
            terminalreporter.write_line(line)
