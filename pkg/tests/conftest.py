import numpy as np
import pytest

from treetrace.tree import LabeledTree, Topology

BINARY2 = Topology.complete(2, 2)
BINARY3 = Topology.complete(2, 3)
ARITIES23 = Topology.from_arities([2, 3])
# root with two children: the first has two children, the second has one
UNEVEN21 = Topology((2, 2, 1, 0, 0, 0))
# leaves on levels 1, 2 and 3
RAGGED = Topology((3, 1, 0, 2, 0, 1, 0, 0))


def random_tree(topo, rng):
    return LabeledTree(topo, tuple(int(b) for b in rng.integers(0, 2, topo.n)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
