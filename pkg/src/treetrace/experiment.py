"""Seeded sample-complexity experiments.

Trial ``t`` draws its planted labels (when random) and then all of its masks
from stream ``(seed, t)``. The masks for a smaller trace count are therefore
a prefix of those for a larger one, and results do not depend on how trials
are spread over worker processes.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import TransitionModel, build_transition_model
from .channels import Channel, ChannelConfig, make_rng, sample_masks
from .reconstruct import (
    CandidateScan,
    TraceBatchSummary,
    reconstruct_exhaustive,
    reconstruct_level_solve,
)
from .subtrace import BatchAugmenter
from .tree import LabeledTree, Topology, read_tree

CSV_COLUMNS = ("model", "k_spec", "n", "d", "q", "estimator", "T", "trials",
               "successes", "wallclock_ms")
ESTIMATORS = ("level-solve", "exhaustive")
LABEL_SOURCES = ("random", "ones", "zeros", "file")
WORKERS_ENV = "TREETRACE_WORKERS"


@dataclass
class ExperimentSpec:
    model: str = "ted"
    q: float = 0.25
    k: int | None = 2
    depth: int | None = 2
    arities: list[int] | None = None
    tree: str | None = None
    labels: str = "random"
    traces: list[int] = field(default_factory=lambda: [1000])
    trials: int = 10
    seed: int = 0
    estimator: str = "level-solve"
    out: str | None = None
    workers: int | None = None
    timing: bool = False

    def channel(self) -> ChannelConfig:
        return ChannelConfig(Channel(self.model), float(self.q))

    def topology(self) -> tuple[Topology, str]:
        """The topology and its short description for the ``k_spec`` column."""
        if self.tree:
            return read_tree(self.tree).topology, "file"
        if self.arities:
            return Topology.from_arities(self.arities), "-".join(str(k) for k in self.arities)
        if self.k is None or self.depth is None:
            raise ValueError("need a tree file, an arity list, or both k and depth")
        return Topology.complete(self.k, self.depth), str(self.k)

    def validate(self) -> None:
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if self.labels not in LABEL_SOURCES:
            raise ValueError(f"unknown label source {self.labels!r}; choose from {LABEL_SOURCES}")
        if self.labels == "file" and not self.tree:
            raise ValueError("label source 'file' needs a tree file")
        if self.trials < 1 or not self.traces or min(self.traces) < 1:
            raise ValueError("trials and trace counts must be positive")
        self.channel()
        self.topology()


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class TrialContext:
    """Everything a trial needs that does not depend on the trial index."""

    def __init__(self, spec: ExperimentSpec):
        spec.validate()
        self.spec = spec
        self.cfg = spec.channel()
        self.topo, self.k_spec = spec.topology()
        self.model: TransitionModel = build_transition_model(self.topo, self.cfg)
        self.batch = BatchAugmenter(self.topo, self.cfg.model, self.model.embedding)
        self.scan = CandidateScan(self.model) if spec.estimator == "exhaustive" else None

    def planted_and_masks(self, trial: int, count: int) -> tuple[LabeledTree, np.ndarray]:
        return planted_and_masks(self.spec, self.topo, trial, count)

    def summarize(self, tree: LabeledTree, masks: np.ndarray) -> TraceBatchSummary:
        summary = TraceBatchSummary.for_model(self.model)
        return summary.add_sums(self.batch.level_sums(masks, tree.labels), len(masks))

    def run_trial(self, count: int, trial: int) -> bool:
        planted, masks = self.planted_and_masks(trial, count)
        summary = self.summarize(planted, masks)
        if self.spec.estimator == "exhaustive":
            res = reconstruct_exhaustive(summary, self.model, self.scan)
            return res.ok and res.tree == planted
        return reconstruct_level_solve(summary, self.model) == planted


def planted_and_masks(spec: ExperimentSpec, topo: Topology, trial: int,
                      count: int) -> tuple[LabeledTree, np.ndarray]:
    """Planted tree and ``count`` masks for ``trial``, both from stream ``(seed, trial)``."""
    rng = make_rng(spec.seed, trial)
    if spec.labels == "file":
        tree = read_tree(spec.tree)
        if tree.topology != topo:
            raise ValueError("label file topology differs from the experiment topology")
        labels = tree.labels
    elif spec.labels == "ones":
        labels = (1,) * topo.n
    elif spec.labels == "zeros":
        labels = (0,) * topo.n
    else:
        labels = tuple(int(b) for b in rng.integers(0, 2, topo.n))
    masks = sample_masks(topo, spec.channel().q, rng, count)
    return LabeledTree(topo, labels), masks


_worker_ctx: TrialContext | None = None


def _init_worker(spec: ExperimentSpec) -> None:
    global _worker_ctx
    _worker_ctx = TrialContext(spec)


def _run_task(task: tuple[int, int]) -> tuple[bool, float]:
    count, trial = task
    t0 = time.perf_counter()
    ok = _worker_ctx.run_trial(count, trial)
    return ok, time.perf_counter() - t0


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """One row per trace count, in the order given."""
    ctx = TrialContext(spec)
    tasks = [(T, t) for T in spec.traces for t in range(spec.trials)]
    workers = spec.workers or default_workers()
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(spec,)) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        _init_worker(spec)
        results = [_run_task(t) for t in tasks]
    rows = []
    for r, T in enumerate(spec.traces):
        chunk = results[r * spec.trials:(r + 1) * spec.trials]
        rows.append({
            "model": ctx.cfg.model.value,
            "k_spec": ctx.k_spec,
            "n": ctx.topo.n,
            "d": ctx.topo.depth,
            "q": repr(float(spec.q)),
            "estimator": spec.estimator,
            "T": T,
            "trials": spec.trials,
            "successes": sum(ok for ok, _ in chunk),
            "wallclock_ms": f"{1000 * sum(dt for _, dt in chunk):.1f}" if spec.timing else "",
        })
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def minimal_traces(rows: list[dict], rate: float = 0.9) -> int | None:
    """Smallest trace count whose success rate reaches ``rate``."""
    hits = [r["T"] for r in rows if r["successes"] >= rate * r["trials"]]
    return min(hits) if hits else None
