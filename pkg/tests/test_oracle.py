import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treetrace.analytic import build_transition_model
from treetrace.channels import Channel, ChannelConfig
from treetrace.oracle import (
    enumerate_masks,
    exact_expected_subtrace,
    exact_survival_prob,
    exact_transition_matrices,
)
from treetrace.tree import LabeledTree, Topology

from conftest import ARITIES23, BINARY2, RAGGED, UNEVEN21, random_tree
from strategies import level_regular_topologies, topologies


def test_enumerate_masks_weights():
    masks = list(enumerate_masks(3, 0.2))
    assert len(masks) == 8
    assert sum(w for _, w in masks) == pytest.approx(1.0)
    assert masks[0][1] == pytest.approx(0.8**3)


@pytest.mark.parametrize("model", list(Channel))
def test_total_probability(model):
    tree = LabeledTree(BINARY2, (1, 0, 1, 1, 0, 1))
    assert exact_expected_subtrace(tree, ChannelConfig(model, 0.37)).total_probability == pytest.approx(1.0)


def test_exact_survival_binary():
    tree = LabeledTree(BINARY2, (0,) * 6)
    cfg = ChannelConfig(Channel.TED, 0.5)
    # a level-1 node survives iff it is kept and one of its leaves is kept
    assert exact_survival_prob(tree, cfg, 0) == pytest.approx(0.375)
    # a leaf survives iff it and its parent are kept
    assert exact_survival_prob(tree, cfg, 2) == pytest.approx(0.25)


@given(level_regular_topologies(), st.floats(0.0, 0.8), st.randoms(use_true_random=False))
@settings(max_examples=25, deadline=None)
def test_ted_closed_form_matches_enumeration(topo, q, rnd):
    if topo.n > 10:
        return
    cfg = ChannelConfig(Channel.TED, q)
    tm = build_transition_model(topo, cfg)
    tree = LabeledTree(topo, tuple(rnd.randint(0, 1) for _ in range(topo.n)))
    exact = exact_expected_subtrace(tree, cfg).levels
    for a, b in zip(tm.expected_levels(tree.labels), exact):
        np.testing.assert_allclose(a, b, atol=1e-12)


@given(topologies(max_nodes=10), st.floats(0.0, 0.8), st.randoms(use_true_random=False))
@settings(max_examples=25, deadline=None)
def test_aon_closed_form_matches_enumeration(topo, q, rnd):
    cfg = ChannelConfig(Channel.AON, q)
    tm = build_transition_model(topo, cfg)
    tree = LabeledTree(topo, tuple(rnd.randint(0, 1) for _ in range(topo.n)))
    exact = exact_expected_subtrace(tree, cfg).levels
    for a, b in zip(tm.expected_levels(tree.labels), exact):
        np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("topo, model", [
    (BINARY2, Channel.TED), (BINARY2, Channel.AON),
    (ARITIES23, Channel.TED), (ARITIES23, Channel.AON),
    (UNEVEN21, Channel.AON), (RAGGED, Channel.AON),
], ids=str)
def test_matrices_match_enumeration_on_real_slots(topo, model):
    cfg = ChannelConfig(model, 0.3)
    tm = build_transition_model(topo, cfg)
    exact = exact_transition_matrices(topo, cfg)
    ref = tm.reference
    offsets = np.cumsum((0,) + ref.level_sizes[1:])
    for lv, (M, E) in enumerate(zip(tm.matrices, exact), start=1):
        real = [int(s - offsets[lv - 1]) for s in tm.embedding.index
                if offsets[lv - 1] <= s < offsets[lv]]
        np.testing.assert_allclose(M[:, real], E[:, real], atol=1e-14)
        padding = np.setdiff1d(np.arange(len(M)), real)
        assert not E[:, padding].any()


@pytest.mark.parametrize("model", list(Channel))
def test_mirror_symmetry_breaks_with_deletions(model):
    topo = Topology.complete(2, 1)
    left, right = LabeledTree(topo, (1, 0)), LabeledTree(topo, (0, 1))
    e_l = exact_expected_subtrace(left, ChannelConfig(model, 0.0)).levels[0]
    e_r = exact_expected_subtrace(right, ChannelConfig(model, 0.0)).levels[0]
    assert e_l.tolist() == e_r[::-1].tolist()
    M = exact_transition_matrices(topo, ChannelConfig(model, 0.3))[0]
    assert M[0, 1] > 0 == M[1, 0]


def test_size_cap():
    tree = LabeledTree(Topology.complete(2, 4), (0,) * 30)
    with pytest.raises(ValueError):
        exact_expected_subtrace(tree, ChannelConfig(Channel.AON, 0.1))
    with pytest.raises(ValueError):
        exact_survival_prob(random_tree(BINARY2, np.random.default_rng(0)),
                            ChannelConfig(Channel.TED, 0.1), 6)
