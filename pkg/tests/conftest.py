import numpy as np
import pytest

from adqsp.consensus import ConsensusConfig
from adqsp.topology import from_edges, generate_geometric_graph, incidence


@pytest.fixture(scope="session")
def graph30():
    return generate_geometric_graph(30, rng=np.random.default_rng(0))


@pytest.fixture(scope="session")
def inc30(graph30):
    return incidence(graph30)


@pytest.fixture(scope="session")
def path4():
    return from_edges(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture(params=[0.0, 0.2, 0.5], ids=["pdmm", "theta0.2", "admm"])
def ccfg(request):
    return ConsensusConfig(c=1.0, theta=request.param, t_max=200)


@pytest.fixture
def s30():
    return np.random.default_rng(123).normal(size=30)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
