import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treetrace.analytic import (
    build_transition_model,
    digit_kernel,
    eval_genfun,
    expected_genfun,
    grid_max_modulus,
    littlewood_grid_max,
    node_survival_prob,
    solve_p_prime,
    survival_recurrence,
    transition_prob_aon,
    transition_prob_ted,
)
from treetrace.channels import Channel, ChannelConfig
from treetrace.oracle import exact_expected_subtrace
from treetrace.tree import LabeledTree, NodeAddress, Topology, TopologyError, index_to_digits

from conftest import ARITIES23, BINARY2, BINARY3, UNEVEN21, random_tree


def test_recurrence_binary():
    # p1 = 1/2 + 1/2 * 1/4, p2 = 1/2 + 1/2 * p1^2
    assert survival_recurrence(0.5, 2, 3).p == pytest.approx((0.5, 0.625, 0.6953125), abs=1e-15)


def test_recurrence_uses_bottom_arity_first():
    # arities (3, 2): height-1 subtrees hang below a level-1 node, which has 2 children
    assert survival_recurrence(0.2, (3, 2)).p == pytest.approx((0.2, 0.2 + 0.8 * 0.04))


def test_recurrence_errors():
    with pytest.raises(ValueError):
        survival_recurrence(1.0, 2, 2)
    with pytest.raises(ValueError):
        survival_recurrence(0.3, 2)
    with pytest.raises(ValueError):
        survival_recurrence(0.3, (2, 0))


@given(st.floats(0.0, 0.95), st.integers(1, 4), st.integers(1, 8))
def test_recurrence_monotone(q, k, d):
    p = survival_recurrence(q, k, d).p
    assert p[0] == q
    assert all(0 <= a <= b < 1 for a, b in zip(p, p[1:]))


@pytest.mark.parametrize("c, q, expected", [
    (1, 0.25, 1 / 3),                 # 1 + p = 4/3
    (2, 0.5, (5**0.5 - 1) / 2),       # 1 + p + p^2 = 2
    (1, 0.45, 9 / 11),                # 1 + p = 20/11
    (3, 0.0, 0.0),
])
def test_p_prime_values(c, q, expected):
    assert solve_p_prime(c, q) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("c, q", [(1, 0.5), (1, 0.7), (2, 2 / 3), (0, 0.1)])
def test_p_prime_rejects(c, q):
    with pytest.raises(ValueError):
        solve_p_prime(c, q)


@given(st.integers(1, 4), st.floats(0.0, 0.999), st.integers(0, 3))
@settings(max_examples=60)
def test_recurrence_bounded_by_p_prime(c, frac, extra):
    q = frac * c / (c + 1)
    bound = solve_p_prime(c, q)
    p = survival_recurrence(q, c + 1 + extra, 1000).p
    assert max(p) <= bound + 1e-12


def test_node_survival_binary():
    table = survival_recurrence(0.5, 2, 2)
    assert node_survival_prob(1, table) == pytest.approx(0.375)   # 1 - p_1
    assert node_survival_prob(2, table) == pytest.approx(0.25)    # (1 - q)(1 - p_0)
    with pytest.raises(ValueError):
        node_survival_prob(3, table)


def test_transition_ted_example():
    # right level-1 node lands left iff it survives and its sibling subtree dies
    table = survival_recurrence(0.5, 2, 2)
    value = transition_prob_ted(NodeAddress(1, (1,)), NodeAddress(1, (0,)), table)
    assert value == pytest.approx(0.375 * 0.625)
    assert value == pytest.approx(0.234375)


def test_transition_aon_examples():
    i, j = NodeAddress(1, (1,)), NodeAddress(1, (0,))
    assert transition_prob_aon(i, j, 0.5) == pytest.approx(0.25)
    assert transition_prob_aon(i, j, 0.3) == pytest.approx(0.21)
    assert transition_prob_aon(j, i, 0.3) == 0.0


def _addresses(topo, lv):
    radices = topo.radices(lv)
    for idx in range(int(np.prod(radices))):
        yield idx, NodeAddress(lv, index_to_digits(idx, radices))


@pytest.mark.parametrize("topo", [BINARY2, BINARY3, ARITIES23], ids=str)
@pytest.mark.parametrize("model", list(Channel))
def test_kron_matches_entrywise(topo, model):
    q = 0.35
    tm = build_transition_model(topo, ChannelConfig(model, q))
    table = survival_recurrence(q, topo.level_arities)
    for lv, M in enumerate(tm.matrices, start=1):
        for (ii, ia), (jj, ja) in itertools.product(list(_addresses(topo, lv)), repeat=2):
            if model is Channel.TED:
                ref = transition_prob_ted(ia, ja, table)
            else:
                ref = transition_prob_aon(ia, ja, q)
            assert M[jj, ii] == pytest.approx(ref, abs=1e-15)


@pytest.mark.parametrize("model", list(Channel))
def test_q0_identity(model):
    tm = build_transition_model(ARITIES23, ChannelConfig(model, 0.0))
    for M in tm.matrices:
        assert np.array_equal(M, np.eye(len(M)))


@given(st.floats(0.0, 0.9), st.sampled_from([BINARY2, BINARY3, ARITIES23, UNEVEN21]),
       st.sampled_from(list(Channel)))
@settings(max_examples=60)
def test_conservation_and_triangularity(q, topo, model):
    if model is Channel.TED and not topo.is_level_regular:
        return
    tm = build_transition_model(topo, ChannelConfig(model, q))
    for lv, M in enumerate(tm.matrices, start=1):
        np.testing.assert_allclose(M.sum(axis=0), tm.level_scale(lv), atol=1e-12)
        assert np.array_equal(M, np.triu(M))
        assert np.all(np.diag(M) > 0)


def test_digit_kernel():
    K = digit_kernel(3, 0.25)
    np.testing.assert_allclose(K, [[1, 0.25, 0.0625], [0, 0.75, 0.375], [0, 0, 0.5625]])


def test_ted_rejects_irregular():
    with pytest.raises(TopologyError):
        build_transition_model(UNEVEN21, ChannelConfig(Channel.TED, 0.2))


def test_matrix_size_cap():
    with pytest.raises(ValueError, match="cap"):
        build_transition_model(Topology.complete(2, 10), ChannelConfig(Channel.AON, 0.1))
    build_transition_model(Topology.complete(2, 10), ChannelConfig(Channel.AON, 0.1),
                           max_entries=2**20)


def test_eval_genfun_corners():
    vals = np.arange(6.0)
    assert eval_genfun(vals, [0, 0], (2, 3)) == 0.0
    assert eval_genfun(vals, [1, 1], (2, 3)) == 15.0
    # w[0] multiplies the last digit (radix 3): index 1 is digits (0, 1)
    assert eval_genfun(np.eye(6)[1], [5, 7], (2, 3)) == 5
    assert eval_genfun(np.eye(6)[3], [5, 7], (2, 3)) == 7
    with pytest.raises(ValueError):
        eval_genfun(vals, [1], (2, 3))


@pytest.mark.parametrize("topo", [BINARY2, ARITIES23], ids=str)
@pytest.mark.parametrize("model", list(Channel))
def test_genfun_identity_against_oracle(topo, model, rng):
    cfg = ChannelConfig(model, 0.3)
    tm = build_transition_model(topo, cfg)
    tree = random_tree(topo, rng)
    exact = exact_expected_subtrace(tree, cfg).levels
    lifted = tm.embedding.lift(np.asarray(tree.labels, dtype=float))
    for _ in range(20):
        for lv in range(1, topo.depth + 1):
            w = rng.uniform(-2, 2, lv) + 1j * rng.uniform(-2, 2, lv)
            w *= np.minimum(1, 2 / np.abs(w))
            lhs = eval_genfun(exact[lv - 1], w, topo.radices(lv))
            rhs = expected_genfun(lifted[lv - 1], w, lv, tm)
            assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@pytest.mark.parametrize("coeffs, value", [
    ([1, 1], 2.0),
    ([1, -1], 2.0),
    ([0, 1], 1.0),
    ([[1, 0], [0, -1]], 2.0),
    ([1, 1, 1], 3.0),
])
def test_littlewood_examples(coeffs, value):
    assert littlewood_grid_max(coeffs, 64) == pytest.approx(value)


def test_littlewood_rejects():
    with pytest.raises(ValueError):
        littlewood_grid_max([1, 2], 8)
    with pytest.raises(ValueError):
        littlewood_grid_max([0, 0], 8)


def test_grid_point_attains_value():
    coeffs = np.array([[1, -1], [0, 1]])
    value, z = grid_max_modulus(coeffs, 32)
    direct = sum(coeffs[a, b] * z[0] ** a * z[1] ** b for a in range(2) for b in range(2))
    assert abs(direct) == pytest.approx(value)
    assert value <= np.abs(coeffs).sum()
