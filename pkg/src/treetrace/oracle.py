"""Exact ground truth on tiny trees by enumerating every deletion mask.

Probabilities are recomputed here from mask weights alone; nothing is taken
from the closed-form model. ``contract_recursive`` is an independent,
recursive reading of the TED rule used to cross-check ``apply_ted``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channels import Channel, ChannelConfig, Trace, apply_channel, build_trace
from .subtrace import augment, extract_subtrace, placements, reference_embedding
from .tree import LabeledTree, Topology

MAX_ORACLE_NODES = 20


@dataclass(frozen=True)
class ExactExpectation:
    levels: tuple[np.ndarray, ...]
    total_probability: float


def _check_size(n: int, max_n: int) -> None:
    if n > max_n:
        raise ValueError(f"enumeration over 2^{n} masks exceeds the cap n <= {max_n}")


def enumerate_masks(n: int, q: float):
    """Yield ``(mask, probability)`` over all ``2^n`` masks."""
    for bits in itertools.product((False, True), repeat=n):
        deleted = sum(bits)
        yield np.array(bits, dtype=bool), q**deleted * (1 - q) ** (n - deleted)


def augmented_outcome(tree: LabeledTree, mask, model: Channel, ref: Topology) -> Trace:
    """The (sub)trace that gets padded: TED extracts full-depth paths first,
    AON uses the trace as is."""
    trace = apply_channel(tree, mask, model)
    if model is Channel.TED:
        return extract_subtrace(trace, tree.topology.depth)
    return trace


def exact_expected_subtrace(tree: LabeledTree, cfg: ChannelConfig,
                            max_n: int = MAX_ORACLE_NODES) -> ExactExpectation:
    """Expected augmented-subtrace labels, summed over all masks."""
    topo = tree.topology
    _check_size(topo.n, max_n)
    ref = reference_embedding(topo).target
    acc = [np.zeros(s) for s in ref.level_sizes[1:]]
    total = 0.0
    for mask, w in enumerate_masks(topo.n, cfg.q):
        total += w
        if w == 0.0:
            continue
        aug = augment(augmented_outcome(tree, mask, cfg.model, ref), ref)
        for a, v in zip(acc, aug.levels):
            a += w * v
    return ExactExpectation(tuple(acc), total)


def exact_survival_prob(tree: LabeledTree, cfg: ChannelConfig, node: int,
                        max_n: int = MAX_ORACLE_NODES) -> float:
    """Probability that original node ``node`` (label index) is present in
    the augmented subtrace."""
    topo = tree.topology
    _check_size(topo.n, max_n)
    if not 0 <= node < topo.n:
        raise ValueError(f"node {node} outside 0..{topo.n - 1}")
    ref = reference_embedding(topo).target
    out = 0.0
    for mask, w in enumerate_masks(topo.n, cfg.q):
        if w and node in augmented_outcome(tree, mask, cfg.model, ref).provenance:
            out += w
    return out


def exact_transition_matrices(topo: Topology, cfg: ChannelConfig,
                              max_n: int = MAX_ORACLE_NODES) -> list[np.ndarray]:
    """``M_l[j, i]`` = P(original node at reference slot ``i`` lands in slot
    ``j``), by enumeration. Columns at padding slots are zero."""
    _check_size(topo.n, max_n)
    emb = reference_embedding(topo)
    ref = emb.target
    offsets = np.cumsum((0,) + ref.level_sizes[1:])
    mats = [np.zeros((s, s)) for s in ref.level_sizes[1:]]
    dummy = LabeledTree(topo, (0,) * topo.n)
    for mask, w in enumerate_masks(topo.n, cfg.q):
        if w == 0.0:
            continue
        out = augmented_outcome(dummy, mask, cfg.model, ref)
        for lv, pos, u in placements(out, ref):
            src = emb.index[out.provenance[u - 1]] - offsets[lv - 1]
            mats[lv - 1][pos, src] += w
    return mats


def contract_recursive(tree: LabeledTree, mask) -> Trace:
    """TED by definition: the surviving children of ``v`` are its surviving
    original children, with every deleted child replaced in place by that
    child's own surviving children."""
    topo = tree.topology
    mask = np.asarray(mask, dtype=bool)
    first = topo.first_child

    def orig_children(v):
        return range(int(first[v]), int(first[v]) + topo.child_counts[v])

    def surviving(v):
        out = []
        for u in orig_children(v):
            if mask[u - 1]:
                out.extend(surviving(u))
            else:
                out.append(u)
        return out

    kids = {}
    stack = [0]
    while stack:
        v = stack.pop()
        kids[v] = surviving(v)
        stack.extend(kids[v])
    return build_trace(kids, tree.labels)
