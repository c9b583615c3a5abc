import numpy as np
import pytest

from tvdopt.topology import Graph, build_schedule, complete_graph

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def alternating3():
    """Single-edge graphs 0-1 and 1-2 on three agents, B = 2."""
    graphs = [Graph.from_edges(3, [(0, 1)]), Graph.from_edges(3, [(1, 2)])]
    return build_schedule("alternating", 3, graphs=graphs, B=2)


@pytest.fixture
def random10():
    return build_schedule("random-gilbert", 10, seed=7, p=0.3, period=1, B=2)


@pytest.fixture
def complete10():
    return build_schedule("fixed", 10, graph=complete_graph(10))
