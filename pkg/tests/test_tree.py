import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treetrace.tree import (
    LabeledTree,
    NodeAddress,
    Topology,
    TopologyError,
    addr_to_index,
    index_to_addr,
    read_tree,
    validate_topology,
    write_tree,
)

from conftest import ARITIES23, BINARY2, UNEVEN21


def test_addr_to_index_examples():
    assert addr_to_index(NodeAddress(2, (0, 0)), ARITIES23) == 0
    assert addr_to_index(NodeAddress(2, (1, 2)), ARITIES23) == 5
    assert addr_to_index(NodeAddress(3, (1, 0, 1)), Topology.complete(2, 3)) == 5


def test_index_to_addr_examples():
    assert index_to_addr(0, 2, ARITIES23).digits == (0, 0)
    assert index_to_addr(5, 2, ARITIES23).digits == (1, 2)
    assert index_to_addr(7, 3, Topology.complete(2, 3)).digits == (1, 1, 1)


def test_address_errors():
    with pytest.raises(TopologyError):
        addr_to_index(NodeAddress(2, (2, 0)), ARITIES23)
    with pytest.raises(TopologyError):
        addr_to_index(NodeAddress(3, (0, 0, 0)), ARITIES23)
    with pytest.raises(TopologyError):
        index_to_addr(6, 2, ARITIES23)
    with pytest.raises(TopologyError):
        addr_to_index(NodeAddress(1, (0,)), UNEVEN21)


def test_address_digits_follow_ancestors():
    # digit a is the sibling position of the level-(a+1) ancestor
    topo = ARITIES23
    parents = topo.parents
    first = topo.first_child
    for lv in (1, 2):
        start, stop = topo.level_bounds[lv]
        for v in range(start, stop):
            digits = index_to_addr(v - start, lv, topo).digits
            u = v
            for a in range(lv - 1, -1, -1):
                p = parents[u]
                assert digits[a] == u - first[p]
                u = p


@st.composite
def arities_and_level(draw):
    arities = draw(st.lists(st.integers(1, 4), min_size=1, max_size=4))
    level = draw(st.integers(1, len(arities)))
    return arities, level


@given(arities_and_level(), st.data())
@settings(max_examples=100)
def test_address_round_trip(al, data):
    arities, level = al
    topo = Topology.from_arities(arities)
    size = topo.level_sizes[level]
    i = data.draw(st.integers(0, size - 1))
    assert addr_to_index(index_to_addr(i, level, topo), topo) == i


def test_address_round_trip_exhaustive():
    topo = Topology.from_arities([3, 2, 2])
    for lv in range(1, 4):
        radices = topo.radices(lv)
        for digits in itertools.product(*(range(k) for k in radices)):
            addr = NodeAddress(lv, digits)
            assert index_to_addr(addr_to_index(addr, topo), lv, topo) == addr


def test_validate_examples():
    t = validate_topology([2, 2, 2, 0, 0, 0, 0])
    assert (t.depth, t.n) == (2, 6)
    assert t.is_complete_kary
    t = validate_topology([2, 3, 3, 0, 0, 0, 0, 0, 0])
    assert t.level_arities == (2, 3) and t.n == 8
    assert t.is_level_regular and not t.is_complete_kary
    with pytest.raises(TopologyError):
        validate_topology([1, 2, 0, 0, 3, 0])
    with pytest.raises(TopologyError):
        validate_topology([])
    with pytest.raises(TopologyError):
        validate_topology([0])
    with pytest.raises(TopologyError):
        validate_topology([2, -1, 0])


def test_disconnected_counts_rejected():
    # counts add up but node 2 is listed before any parent creates it
    with pytest.raises(TopologyError):
        validate_topology([1, 0, 1])


@given(st.lists(st.integers(1, 3), min_size=1, max_size=4))
def test_level_sizes(arities):
    topo = Topology.from_arities(arities)
    assert sum(topo.level_sizes) == topo.n + 1
    assert topo.level_sizes == tuple(int(np.prod(arities[:lv])) for lv in range(len(arities) + 1))


def test_complete_kary_level_sizes():
    topo = Topology.complete(3, 3)
    assert topo.level_sizes == (1, 3, 9, 27)


def test_irregular_topologies():
    assert not UNEVEN21.is_level_regular
    assert UNEVEN21.k_max == 2 and UNEVEN21.depth == 2
    ragged = Topology((3, 1, 0, 2, 0, 1, 0, 0))
    assert ragged.depth == 3 and not ragged.is_level_regular


def test_labeled_tree_levels_and_errors():
    tree = LabeledTree(BINARY2, (1, 0, 1, 1, 0, 0))
    assert [lv.tolist() for lv in tree.levels()] == [[1, 0], [1, 1, 0, 0]]
    assert LabeledTree.from_levels(BINARY2, tree.levels()) == tree
    with pytest.raises(TopologyError):
        LabeledTree(BINARY2, (1, 0))
    with pytest.raises(TopologyError):
        LabeledTree(BINARY2, (2, 0, 0, 0, 0, 0))


def test_tree_file_round_trip(tmp_path):
    tree = LabeledTree(UNEVEN21, (1, 0, 1, 1, 0))
    path = tmp_path / "tree.json"
    write_tree(tree, path)
    assert json.loads(path.read_text()) == {"child_counts": [2, 2, 1, 0, 0, 0], "labels": [1, 0, 1, 1, 0]}
    assert read_tree(path) == tree


def test_tree_file_bad_labels(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"child_counts": [1, 0], "labels": [1, 1]}))
    with pytest.raises(TopologyError):
        read_tree(path)
