import numpy as np
import pytest

from etconsensus import presets, simulator


@pytest.fixture(scope="session")
def paper_scenario():
    return presets.paper_scenario()


@pytest.fixture(scope="session")
def paper_trace(paper_scenario):
    return simulator.run(paper_scenario)


@pytest.fixture()
def a0():
    return np.array([[0.0, 2.0], [-1.5, 0.0]])


@pytest.fixture()
def agent1():
    a = np.array([[1.0, -1.0], [-2.0, 3.0]])
    b = np.array([[2.0, 0.5], [0.5, 1.0]])
    c = np.array([[1.0, 0.0]])
    return a, b, c
