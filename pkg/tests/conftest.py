import numpy as np
import pytest
from hypothesis import settings

from smile_spectrum.channel import PAPER_RAYLEIGH6, ChannelMatrix, paper_rayleigh6
from smile_spectrum.topology import build_graph

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

PAPER_MEANS = np.array(
    [
        [45, 10, 35, 25, 80],
        [30, 45, 20, 75, 90],
        [55, 5, 70, 15, 45],
    ],
    dtype=float,
)

FIG2_MEANS = np.array(
    [[60, 40, 50], [30, 20, 75], [58, 55, 80], [10, 15, 90], [35, 70, 25]],
    dtype=float,
)
FIG2_EDGES = [(1, 2), (1, 3), (1, 4), (3, 4)]


@pytest.fixture(scope="session")
def paper_graph():
    return build_graph(3, [(1, 2)], one_based=True)


@pytest.fixture(scope="session")
def paper_channels():
    return ChannelMatrix.from_grid([[paper_rayleigh6(m) for m in row] for row in PAPER_MEANS])


@pytest.fixture(scope="session")
def fig2_graph():
    return build_graph(5, FIG2_EDGES, one_based=True)


@pytest.fixture(scope="session")
def rayleigh_matrix():
    return PAPER_RAYLEIGH6.copy()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
