"""Rooted ordered trees with binary labels and mixed-radix node addressing.

Nodes are numbered in breadth-first, left-to-right order with the root at 0.
Labels live on the ``n`` non-root nodes, so node ``v`` carries ``labels[v - 1]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Known shape of a rooted ordered tree, given by BFS child counts."""

    child_counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.child_counts)
        object.__setattr__(self, "child_counts", counts)
        if not counts:
            raise TopologyError("empty tree")
        if any(c < 0 for c in counts):
            raise TopologyError("child counts must be non-negative")
        if counts[0] == 0:
            raise TopologyError("tree must have at least one non-root node")
        # every node must already have been created by an earlier parent
        created = 1
        for v, c in enumerate(counts):
            if v >= created:
                raise TopologyError(f"node {v} is not reachable from the root")
            created += c
        if created != len(counts):
            raise TopologyError(
                f"child counts describe {created} nodes but {len(counts)} were listed"
            )

    @classmethod
    def complete(cls, k: int, depth: int) -> Topology:
        return cls.from_arities([k] * depth)

    @classmethod
    def from_arities(cls, arities: Sequence[int]) -> Topology:
        """Level-regular tree where every node on level ``l`` has ``arities[l]`` children."""
        if not arities or any(int(k) < 1 for k in arities):
            raise TopologyError("arities must be a non-empty list of positive integers")
        counts: list[int] = []
        size = 1
        for k in arities:
            counts.extend([int(k)] * size)
            size *= int(k)
        counts.extend([0] * size)
        return cls(tuple(counts))

    @property
    def n(self) -> int:
        return len(self.child_counts) - 1

    @cached_property
    def parents(self) -> np.ndarray:
        """Parent node id of every node (-1 for the root)."""
        parent = np.full(len(self.child_counts), -1, dtype=np.int64)
        nxt = 1
        for v, c in enumerate(self.child_counts):
            parent[nxt:nxt + c] = v
            nxt += c
        return parent

    @cached_property
    def first_child(self) -> np.ndarray:
        offsets = np.cumsum((1,) + self.child_counts[:-1])
        return offsets.astype(np.int64)

    @cached_property
    def level_bounds(self) -> tuple[tuple[int, int], ...]:
        """Half-open node id ranges ``(start, stop)`` for levels 0..d."""
        bounds = [(0, 1)]
        while True:
            start, stop = bounds[-1]
            size = sum(self.child_counts[start:stop])
            if size == 0:
                break
            bounds.append((stop, stop + size))
        return tuple(bounds)

    @property
    def depth(self) -> int:
        return len(self.level_bounds) - 1

    @property
    def level_sizes(self) -> tuple[int, ...]:
        return tuple(stop - start for start, stop in self.level_bounds)

    @cached_property
    def node_levels(self) -> np.ndarray:
        lv = np.empty(len(self.child_counts), dtype=np.int64)
        for level, (start, stop) in enumerate(self.level_bounds):
            lv[start:stop] = level
        return lv

    @property
    def k_max(self) -> int:
        return max(self.child_counts)

    @cached_property
    def level_arities(self) -> tuple[int, ...] | None:
        """``(k_0, ..., k_{d-1})`` if every node on each level has the same
        number of children, else None. Level-regular trees have all leaves at depth d."""
        arities = []
        for start, stop in self.level_bounds[:-1]:
            ks = set(self.child_counts[start:stop])
            if len(ks) != 1:
                return None
            arities.append(ks.pop())
        return tuple(arities)

    @property
    def is_level_regular(self) -> bool:
        return self.level_arities is not None

    @property
    def is_complete_kary(self) -> bool:
        ar = self.level_arities
        return ar is not None and len(set(ar)) == 1

    @property
    def k_min(self) -> int:
        """Smallest child count among non-leaf nodes."""
        return min(c for c in self.child_counts if c > 0)

    def radices(self, level: int) -> tuple[int, ...]:
        """Digit radices ``(k_0, ..., k_{level-1})`` of addresses on ``level``,
        most significant first."""
        ar = self.level_arities
        if ar is None:
            raise TopologyError("mixed-radix addressing requires a level-regular topology")
        if not 1 <= level <= self.depth:
            raise TopologyError(f"level {level} outside 1..{self.depth}")
        return ar[:level]

    def to_json(self) -> dict:
        return {"child_counts": list(self.child_counts)}


def validate_topology(child_counts: Sequence[int]) -> Topology:
    return Topology(tuple(child_counts))


@dataclass(frozen=True)
class NodeAddress:
    """Position of a node on ``level`` as digits ``(t_{l-1}, ..., t_0)``.

    ``digits[0]`` is the position among its siblings of the node's ancestor on
    level 1, ``digits[-1]`` the position of the node itself.
    """

    level: int
    digits: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(t) for t in self.digits))
        if self.level < 1 or len(self.digits) != self.level:
            raise TopologyError(f"level {self.level} needs exactly {self.level} digits")

    def dominated_by(self, other: NodeAddress) -> bool:
        """Digitwise ``self <= other``."""
        return self.level == other.level and all(
            a <= b for a, b in zip(self.digits, other.digits)
        )


def digits_to_index(digits: Sequence[int], radices: Sequence[int]) -> int:
    if len(digits) != len(radices):
        raise TopologyError("digit count does not match radix count")
    i = 0
    for t, k in zip(digits, radices):
        if not 0 <= t < k:
            raise TopologyError(f"digit {t} outside radix {k}")
        i = i * k + t
    return i


def index_to_digits(i: int, radices: Sequence[int]) -> tuple[int, ...]:
    size = int(np.prod(radices, dtype=np.int64))
    if not 0 <= i < size:
        raise TopologyError(f"index {i} outside 0..{size - 1}")
    out = []
    for k in reversed(radices):
        i, t = divmod(i, k)
        out.append(t)
    return tuple(reversed(out))


def digit_table(radices: Sequence[int]) -> np.ndarray:
    """Digits of every index, shape ``(len(radices), prod(radices))``."""
    return np.indices(tuple(radices)).reshape(len(radices), -1)


def addr_to_index(addr: NodeAddress, topo: Topology) -> int:
    return digits_to_index(addr.digits, topo.radices(addr.level))


def index_to_addr(i: int, level: int, topo: Topology) -> NodeAddress:
    return NodeAddress(level, index_to_digits(i, topo.radices(level)))


@dataclass(frozen=True)
class LabeledTree:
    topology: Topology
    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(b) for b in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) != self.topology.n:
            raise TopologyError(
                f"expected {self.topology.n} labels, got {len(labels)}"
            )
        if any(b not in (0, 1) for b in labels):
            raise TopologyError("labels must be 0 or 1")

    @classmethod
    def from_levels(cls, topo: Topology, levels: Sequence[Sequence[int]]) -> LabeledTree:
        flat = [int(b) for lv in levels for b in lv]
        return cls(topo, tuple(flat))

    def level_labels(self, level: int) -> np.ndarray:
        start, stop = self.topology.level_bounds[level]
        return np.asarray(self.labels[start - 1:stop - 1], dtype=np.int64)

    def levels(self) -> list[np.ndarray]:
        """Label vectors for levels 1..d."""
        return [self.level_labels(lv) for lv in range(1, self.topology.depth + 1)]

    def to_json(self) -> dict:
        return {"child_counts": list(self.topology.child_counts), "labels": list(self.labels)}

    @classmethod
    def from_json(cls, obj: dict) -> LabeledTree:
        if "child_counts" not in obj or "labels" not in obj:
            raise TopologyError("tree JSON needs 'child_counts' and 'labels'")
        return cls(Topology(tuple(obj["child_counts"])), tuple(obj["labels"]))


def read_tree(path: str | Path) -> LabeledTree:
    with open(path) as fh:
        return LabeledTree.from_json(json.load(fh))


def write_tree(tree: LabeledTree, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(tree.to_json(), fh)
        fh.write("\n")
