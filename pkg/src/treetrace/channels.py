"""TED and AON deletion channels.

Channels are split into a deterministic part (apply a given deletion mask) and
mask sampling, so the tree surgery can be tested without randomness.

Random streams use numpy's PCG64 seeded through ``SeedSequence(seed,
spawn_key=stream)``. The same ``(seed, stream)`` pair yields the same masks on
every platform, and sampling for trial ``t`` never depends on other trials.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .tree import LabeledTree, Topology


class Channel(str, enum.Enum):
    TED = "ted"
    AON = "aon"


@dataclass(frozen=True)
class ChannelConfig:
    model: Channel
    q: float

    def __post_init__(self):
        object.__setattr__(self, "model", Channel(self.model))
        if not 0.0 <= self.q < 1.0:
            raise ValueError(f"deletion probability must lie in [0, 1), got {self.q}")


@dataclass(frozen=True)
class Trace:
    """Ordered rooted labeled tree produced by a channel.

    ``provenance[j]`` is the original label index (0-based, BFS over non-root
    nodes) of trace node ``j + 1``.
    """

    child_counts: tuple[int, ...]
    labels: tuple[int, ...]
    provenance: tuple[int, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.labels)

    def children(self) -> list[list[int]]:
        out = []
        nxt = 1
        for c in self.child_counts:
            out.append(list(range(nxt, nxt + c)))
            nxt += c
        return out

    def node_depths(self) -> list[int]:
        depth = [0] * len(self.child_counts)
        for v, kids in enumerate(self.children()):
            for u in kids:
                depth[u] = depth[v] + 1
        return depth

    def to_json(self) -> dict:
        obj = {"child_counts": list(self.child_counts), "labels": list(self.labels)}
        if self.provenance is not None:
            obj["provenance"] = list(self.provenance)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> Trace:
        prov = obj.get("provenance")
        counts = tuple(int(c) for c in obj["child_counts"])
        labels = tuple(int(b) for b in obj["labels"])
        if 1 + sum(counts) != len(counts) or len(labels) != len(counts) - 1:
            raise ValueError("malformed trace: child counts and labels disagree")
        return cls(counts, labels, None if prov is None else tuple(int(p) for p in prov))

    @classmethod
    def from_tree(cls, tree: LabeledTree) -> Trace:
        return cls(tree.topology.child_counts, tree.labels, tuple(range(tree.topology.n)))


def build_trace(kids: Mapping[int, Sequence[int]], labels: Sequence[int]) -> Trace:
    """Serialize an explicit child map over original node ids (root 0) in BFS order."""
    counts, out_labels, prov = [], [], []
    frontier = [0]
    while frontier:
        nxt = []
        for v in frontier:
            ch = kids.get(v, ())
            counts.append(len(ch))
            for u in ch:
                out_labels.append(labels[u - 1])
                prov.append(u - 1)
            nxt.extend(ch)
        frontier = nxt
    return Trace(tuple(counts), tuple(out_labels), tuple(prov))


def _original_children(topo: Topology) -> dict[int, list[int]]:
    first = topo.first_child
    return {
        v: list(range(int(first[v]), int(first[v]) + c))
        for v, c in enumerate(topo.child_counts)
        if c
    }


def _check_mask(tree: LabeledTree, mask) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (tree.topology.n,):
        raise ValueError(f"mask has shape {mask.shape}, expected ({tree.topology.n},)")
    return mask


def contract(tree: LabeledTree, order: Iterable[int]) -> Trace:
    """Delete original nodes (label indices) one at a time, in the given order."""
    topo = tree.topology
    kids = _original_children(topo)
    parent = {v: int(p) for v, p in enumerate(topo.parents) if p >= 0}
    for idx in order:
        v = idx + 1
        p = parent[v]
        siblings = kids[p]
        pos = siblings.index(v)
        moved = kids.pop(v, [])
        siblings[pos:pos + 1] = moved
        for u in moved:
            parent[u] = p
    return build_trace(kids, tree.labels)


def apply_ted(tree: LabeledTree, mask) -> Trace:
    """Contract the edge above every masked node.

    The children of a deleted node take its place among its siblings. Nodes
    are removed deepest level first.
    """
    mask = _check_mask(tree, mask)
    deleted = np.flatnonzero(mask)
    return contract(tree, deleted[::-1].tolist())


def apply_aon(tree: LabeledTree, mask) -> Trace:
    """Drop every masked node together with its whole subtree."""
    mask = _check_mask(tree, mask)
    topo = tree.topology
    alive = np.ones(topo.n + 1, dtype=bool)
    parents = topo.parents
    for v in range(1, topo.n + 1):
        alive[v] = alive[parents[v]] and not mask[v - 1]
    kids = {
        v: [u for u in ch if alive[u]]
        for v, ch in _original_children(topo).items()
        if alive[v]
    }
    return build_trace(kids, tree.labels)


def apply_channel(tree: LabeledTree, mask, model: Channel | str) -> Trace:
    if Channel(model) is Channel.TED:
        return apply_ted(tree, mask)
    return apply_aon(tree, mask)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for substream ``stream`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def sample_mask(topo: Topology, q: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= q < 1.0:
        raise ValueError(f"deletion probability must lie in [0, 1), got {q}")
    return rng.random(topo.n) < q


def sample_masks(topo: Topology, q: float, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` independent masks as rows. Row ``t`` equals what ``count``
    successive ``sample_mask`` calls would have produced."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"deletion probability must lie in [0, 1), got {q}")
    return rng.random((count, topo.n)) < q


def sample_trace(tree: LabeledTree, cfg: ChannelConfig, rng: np.random.Generator) -> Trace:
    return apply_channel(tree, sample_mask(tree.topology, cfg.q, rng), cfg.model)
