"""Subtrace extraction and zero-padding to a reference shape.

Augmented subtraces are stored as flat per-level 0/1 vectors laid out in the
mixed-radix order of the reference topology.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import Channel, Trace, build_trace
from .tree import LabeledTree, Topology, TopologyError


@dataclass(frozen=True)
class AugmentedSubtrace:
    levels: tuple[np.ndarray, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.levels)

    def to_json(self) -> dict:
        return {"levels": [v.astype(int).tolist() for v in self.levels]}

    @classmethod
    def from_json(cls, obj: dict) -> AugmentedSubtrace:
        return cls(tuple(np.asarray(v, dtype=np.int64) for v in obj["levels"]))


def extract_subtrace(trace: Trace, d: int) -> Trace:
    """Keep only the root-to-leaf paths of length exactly ``d``."""
    kids = trace.children()
    depth = trace.node_depths()
    keep = [dep == d for dep in depth]
    # BFS ids: children always come after parents, so one backwards pass suffices
    for v in range(len(kids) - 1, -1, -1):
        if not keep[v] and any(keep[u] for u in kids[v]):
            keep[v] = True
    if not keep[0]:
        return Trace((0,), (), ())
    kept = {v: [u for u in ch if keep[u]] for v, ch in enumerate(kids) if keep[v]}
    sub = build_trace(kept, trace.labels)
    if trace.provenance is None:
        return Trace(sub.child_counts, sub.labels, None)
    prov = tuple(trace.provenance[j] for j in sub.provenance)
    return Trace(sub.child_counts, sub.labels, prov)


def placements(trace: Trace, ref: Topology) -> list[tuple[int, int, int]]:
    """``(level, position, trace node)`` for every non-root trace node, where
    position is its slot on that level of the padded reference shape."""
    arities = ref.level_arities
    if arities is None:
        raise TopologyError("reference shape must be level-regular")
    kids = trace.children()
    pos = {0: 0}
    level = {0: 0}
    out = []
    for v, ch in enumerate(kids):
        if not ch:
            continue
        lv = level[v]
        if lv >= len(arities):
            raise ValueError(f"trace is deeper than the reference depth {len(arities)}")
        k = arities[lv]
        if len(ch) > k:
            raise ValueError(
                f"trace node {v} has {len(ch)} children but the reference allows {k}"
            )
        for r, u in enumerate(ch):
            pos[u] = pos[v] * k + r
            level[u] = lv + 1
            out.append((lv + 1, pos[u], u))
    return out


def augment(sub: Trace, ref: Topology) -> AugmentedSubtrace:
    """Pad every node's child list on the right with 0-labeled children until
    it matches the reference arity, top to bottom and left to right."""
    levels = [np.zeros(s, dtype=np.int64) for s in ref.level_sizes[1:]]
    for lv, p, u in placements(sub, ref):
        levels[lv - 1][p] = sub.labels[u - 1]
    return AugmentedSubtrace(tuple(levels))


@dataclass(frozen=True)
class Embedding:
    """Map from the nodes of ``source`` into a level-regular ``target``.

    ``index[i]`` is the target label index of source label ``i``; for every
    source node the digits of its address are preserved.
    """

    source: Topology
    target: Topology
    index: np.ndarray

    @property
    def is_identity(self) -> bool:
        return self.source == self.target

    def lift(self, labels: Sequence[int] | np.ndarray) -> list[np.ndarray]:
        """Per-level target vectors, 0 at padding positions."""
        flat = np.zeros(self.target.n, dtype=np.asarray(labels).dtype)
        flat[self.index] = labels
        return split_levels(flat, self.target)

    def restrict(self, levels: Sequence[np.ndarray]) -> np.ndarray:
        return np.concatenate(list(levels))[self.index]

    def lift_tree(self, tree: LabeledTree) -> LabeledTree:
        if tree.topology != self.source:
            raise TopologyError("tree does not match the embedding source")
        return LabeledTree.from_levels(self.target, self.lift(np.asarray(tree.labels)))


def split_levels(flat: np.ndarray, topo: Topology) -> list[np.ndarray]:
    bounds = topo.level_bounds
    return [flat[start - 1:stop - 1] for start, stop in bounds[1:]]


def regularize_topology(topo: Topology) -> Embedding:
    """Embed ``topo`` in the complete ``k_max``-ary tree of the same depth."""
    target = Topology.complete(topo.k_max, topo.depth)
    return _embed(topo, target)


def reference_embedding(topo: Topology) -> Embedding:
    """Level-regular topologies are their own reference; anything else is
    regularized to ``k_max``."""
    if topo.is_level_regular:
        return Embedding(topo, topo, np.arange(topo.n))
    return regularize_topology(topo)


def _embed(topo: Topology, target: Topology) -> Embedding:
    trace = Trace(topo.child_counts, (0,) * topo.n, None)
    offsets = np.cumsum((0,) + target.level_sizes[1:])
    index = np.empty(topo.n, dtype=np.int64)
    for lv, p, u in placements(trace, target):
        index[u - 1] = offsets[lv - 1] + p
    return Embedding(topo, target, index)


class BatchAugmenter:
    """Vectorized augmented subtraces for many deletion masks at once.

    Equivalent to ``augment(extract_subtrace(apply_ted(tree, m), d), ref)`` for
    TED and ``augment(apply_aon(tree, m), ref)`` for AON, for every row ``m``.
    """

    def __init__(self, topo: Topology, model: Channel | str, emb: Embedding | None = None):
        self.topo = topo
        self.model = Channel(model)
        self.emb = emb if emb is not None else reference_embedding(topo)
        if self.emb.source != topo:
            raise TopologyError("embedding does not match topology")
        self.ref_arities = self.emb.target.level_arities
        bounds = topo.level_bounds
        counts = np.asarray(topo.child_counts)
        # per level >= 1: group start (within the level) of each node's sibling block
        self._group_start = []
        self._parent_local = []
        for lv in range(1, len(bounds)):
            start, stop = bounds[lv]
            pstart, pstop = bounds[lv - 1]
            sizes = counts[pstart:pstop]
            starts = np.repeat(np.cumsum(sizes) - sizes, sizes)
            self._group_start.append(starts)
            self._parent_local.append(np.repeat(np.arange(pstop - pstart), sizes))
        self._child_counts = [counts[s:e] for s, e in bounds]

    def _present(self, masks: np.ndarray) -> list[np.ndarray]:
        """Boolean (T, level size) arrays: does each node appear in the
        (sub)trace being augmented."""
        topo = self.topo
        bounds = topo.level_bounds
        d = topo.depth
        T = masks.shape[0]
        alive = [np.ones((T, 1), dtype=bool)]
        for lv in range(1, d + 1):
            start, stop = bounds[lv]
            own = ~masks[:, start - 1:stop - 1]
            alive.append(own & alive[lv - 1][:, self._parent_local[lv - 1]])
        if self.model is Channel.AON:
            return alive
        # TED: a node is kept iff its root path survives and some path below
        # it reaches depth d with every node surviving
        down = [None] * (d + 1)
        down[d] = ~masks[:, bounds[d][0] - 1:bounds[d][1] - 1]
        for lv in range(d - 1, 0, -1):
            start, stop = bounds[lv]
            child = down[lv + 1].astype(np.int32)
            cs = np.concatenate([np.zeros((T, 1), np.int32), np.cumsum(child, axis=1)], axis=1)
            sizes = self._child_counts[lv]
            ends = np.cumsum(sizes)
            any_child = (cs[:, ends] - cs[:, ends - sizes]) > 0
            down[lv] = ~masks[:, start - 1:stop - 1] & any_child
        present = [alive[0]]
        for lv in range(1, d + 1):
            present.append(down[lv] & alive[lv])
        return present

    def positions(self, masks: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Per level: (present, position) arrays of shape (T, level size)."""
        masks = np.asarray(masks, dtype=bool)
        if masks.ndim != 2 or masks.shape[1] != self.topo.n:
            raise ValueError(f"masks must have shape (T, {self.topo.n})")
        present = self._present(masks)
        T = masks.shape[0]
        pos = [np.zeros((T, 1), dtype=np.int64)]
        for lv in range(1, self.topo.depth + 1):
            f = present[lv].astype(np.int64)
            cs = np.cumsum(f, axis=1)
            gs = self._group_start[lv - 1]
            before = np.where(gs > 0, cs[:, np.maximum(gs - 1, 0)], 0)
            rank = cs - before - 1
            k = self.ref_arities[lv - 1]
            pos.append(pos[lv - 1][:, self._parent_local[lv - 1]] * k + rank)
        return present[1:], pos[1:]

    def level_arrays(self, masks: np.ndarray, labels: Sequence[int]) -> list[np.ndarray]:
        """Augmented subtrace label vectors, one (T, reference level size) array per level."""
        present, pos = self.positions(masks)
        T = present[0].shape[0] if present else 0
        labels = np.asarray(labels, dtype=np.int64)
        bounds = self.topo.level_bounds
        out = []
        for lv, size in enumerate(self.emb.target.level_sizes[1:], start=1):
            arr = np.zeros((T, size), dtype=np.uint8)
            start, stop = bounds[lv]
            on = present[lv - 1] & (labels[start - 1:stop - 1] == 1)
            r, c = np.nonzero(on)
            arr[r, pos[lv - 1][r, c]] = 1
            out.append(arr)
        return out

    def level_sums(self, masks: np.ndarray, labels: Sequence[int]) -> list[np.ndarray]:
        """Sum over rows of ``level_arrays`` without materializing them."""
        present, pos = self.positions(masks)
        labels = np.asarray(labels, dtype=np.int64)
        bounds = self.topo.level_bounds
        out = []
        for lv, size in enumerate(self.emb.target.level_sizes[1:], start=1):
            start, stop = bounds[lv]
            on = present[lv - 1] & (labels[start - 1:stop - 1] == 1)
            out.append(np.bincount(pos[lv - 1][on], minlength=size).astype(np.float64))
        return out
