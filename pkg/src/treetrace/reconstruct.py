"""Mean-based reconstruction of node labels from augmented subtraces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .analytic import TransitionModel, eval_genfun, grid_max_modulus
from .channels import Channel
from .subtrace import AugmentedSubtrace
from .tree import LabeledTree

# discriminating positions whose gaps agree to this tolerance count as tied
TIE_TOL = 1e-12

EXHAUSTIVE_DEFAULT_MAX_N = 12
EXHAUSTIVE_HARD_MAX_N = 16


@dataclass(frozen=True)
class TraceBatchSummary:
    """Running per-level sums of augmented subtraces and their count."""

    sums: tuple[np.ndarray, ...]
    count: int = 0

    @classmethod
    def empty(cls, level_sizes: Sequence[int]) -> TraceBatchSummary:
        return cls(tuple(np.zeros(s) for s in level_sizes), 0)

    @classmethod
    def for_model(cls, model: TransitionModel) -> TraceBatchSummary:
        return cls.empty(model.reference.level_sizes[1:])

    @classmethod
    def from_means(cls, levels: Sequence[np.ndarray], count: int = 1) -> TraceBatchSummary:
        """Summary whose means are exactly ``levels`` (e.g. exact expectations)."""
        return cls(tuple(np.asarray(v, dtype=np.float64) * count for v in levels), count)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.sums)

    def _check(self, shape):
        if tuple(shape) != self.shape:
            raise ValueError(f"shape {tuple(shape)} does not match summary shape {self.shape}")

    def add_sums(self, level_sums: Sequence[np.ndarray], count: int) -> TraceBatchSummary:
        self._check(len(s) for s in level_sums)
        return TraceBatchSummary(
            tuple(a + np.asarray(b, dtype=np.float64) for a, b in zip(self.sums, level_sums)),
            self.count + count,
        )

    def means(self) -> list[np.ndarray]:
        if self.count == 0:
            raise ValueError("empty summary has no means")
        return [s / self.count for s in self.sums]

    def to_json(self) -> dict:
        return {"count": self.count, "sums": [s.tolist() for s in self.sums]}


def accumulate(summary: TraceBatchSummary, sub: AugmentedSubtrace) -> TraceBatchSummary:
    return summary.add_sums(sub.levels, 1)


def merge(a: TraceBatchSummary, b: TraceBatchSummary) -> TraceBatchSummary:
    return a.add_sums(b.sums, b.count)


@dataclass(frozen=True)
class CandidatePair:
    """Where two candidate labelings are told apart.

    ``level`` is the first level on which they differ, ``diff`` the signed
    label difference there (on the reference shape), ``index`` the slot with
    the largest expected gap ``gap``.
    """

    level: int
    index: int
    diff: np.ndarray
    gap: float
    expected_first: float
    expected_second: float


def _pick_index(gaps: np.ndarray) -> np.ndarray:
    """Row-wise argmax of ``|gaps|``, near-ties going to the smallest index."""
    absg = np.abs(gaps)
    best = absg.max(axis=-1, keepdims=True)
    return np.argmax(absg >= best - TIE_TOL, axis=-1)


def discriminator(first: LabeledTree, second: LabeledTree, model: TransitionModel) -> CandidatePair:
    if first.topology != model.topology or second.topology != model.topology:
        raise ValueError("candidates must share the model topology")
    if first.labels == second.labels:
        raise ValueError("candidates are identical")
    emb = model.embedding
    b1 = emb.lift(np.asarray(first.labels, dtype=np.int64))
    b2 = emb.lift(np.asarray(second.labels, dtype=np.int64))
    lv = next(i for i, (x, y) in enumerate(zip(b1, b2)) if np.any(x != y))
    M = model.matrices[lv]
    diff = b1[lv] - b2[lv]
    g = M @ diff
    i = int(_pick_index(g))
    return CandidatePair(
        level=lv + 1,
        index=i,
        diff=diff,
        gap=float(abs(g[i])),
        expected_first=float(M[i] @ b1[lv]),
        expected_second=float(M[i] @ b2[lv]),
    )


def beats(first: LabeledTree, second: LabeledTree, summary: TraceBatchSummary,
          model: TransitionModel) -> bool:
    """True iff the empirical mean at the discriminating slot is strictly
    closer to ``first``'s expectation than to ``second``'s."""
    pair = discriminator(first, second, model)
    m = summary.means()[pair.level - 1][pair.index]
    return abs(m - pair.expected_first) < abs(m - pair.expected_second)


@dataclass
class ReconstructionResult:
    tree: LabeledTree | None
    status: str
    traces: int
    estimator: str
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict:
        obj = self.tree.to_json() if self.tree is not None else {}
        obj.update({"status": self.status, "trials": self.traces, "estimator": self.estimator})
        obj.update(self.extra)
        return obj


class CandidateScan:
    """Every labeling of the model topology with its expected subtrace,
    precomputed once so that many summaries can be scanned cheaply."""

    def __init__(self, model: TransitionModel, max_n: int = EXHAUSTIVE_DEFAULT_MAX_N):
        n = model.topology.n
        if max_n > EXHAUSTIVE_HARD_MAX_N:
            raise ValueError(f"exhaustive scan supports n <= {EXHAUSTIVE_HARD_MAX_N}")
        if n > max_n:
            raise ValueError(f"exhaustive scan over 2^{n} candidates exceeds the cap n <= {max_n}")
        self.model = model
        codes = np.arange(2**n, dtype=np.int64)
        # bit n-1-i of the code is label i, so codes enumerate labelings lexicographically
        self.labels = ((codes[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int64)
        emb = model.embedding
        flat = np.zeros((len(codes), model.reference.n), dtype=np.int64)
        flat[:, emb.index] = self.labels
        bounds = model.reference.level_bounds
        self.lifted = [flat[:, s - 1:e - 1] for s, e in bounds[1:]]
        self.expected = [L @ M.T for L, M in zip(self.lifted, model.matrices)]

    def beats_all(self, c: int, means: Sequence[np.ndarray]) -> bool:
        d = len(self.lifted)
        differs = np.stack([np.any(L != L[c], axis=1) for L in self.lifted], axis=1)
        first = np.where(differs.any(axis=1), np.argmax(differs, axis=1), -1)
        for lv in range(d):
            rows = np.flatnonzero(first == lv)
            if rows.size == 0:
                continue
            D = self.lifted[lv][c] - self.lifted[lv][rows]
            G = D @ self.model.matrices[lv].T
            idx = _pick_index(G)
            m = means[lv][idx]
            e1 = self.expected[lv][c, idx]
            e2 = self.expected[lv][rows, idx]
            if not np.all(np.abs(m - e1) < np.abs(m - e2)):
                return False
        return True

    def winner(self, means: Sequence[np.ndarray]) -> int | None:
        # at most one candidate can beat all others; try likely ones first
        err = sum(((E - m) ** 2).sum(axis=1) for E, m in zip(self.expected, means))
        for c in np.argsort(err, kind="stable"):
            if self.beats_all(int(c), means):
                return int(c)
        return None


def reconstruct_exhaustive(summary: TraceBatchSummary, model: TransitionModel,
                           scan: CandidateScan | None = None,
                           max_n: int = EXHAUSTIVE_DEFAULT_MAX_N) -> ReconstructionResult:
    """Return the unique candidate that beats every other candidate, or a
    ``no_unique_winner`` result when there is none."""
    if scan is None:
        scan = CandidateScan(model, max_n)
    means = summary.means()
    c = scan.winner(means)
    if c is None:
        return ReconstructionResult(None, "no_unique_winner", summary.count, "exhaustive")
    tree = LabeledTree(model.topology, tuple(int(b) for b in scan.labels[c]))
    return ReconstructionResult(tree, "ok", summary.count, "exhaustive")


def solve_levels(summary: TraceBatchSummary, model: TransitionModel) -> list[np.ndarray]:
    """Real-valued solutions of ``M_l x = mean_l`` on the reference shape.

    ``M_l`` is zero below the diagonal in linear index order (digitwise
    dominance implies numeric order), so back-substitution from the last slot
    is a valid elimination order.
    """
    means = summary.means()
    if tuple(len(m) for m in means) != tuple(len(M) for M in model.matrices):
        raise ValueError("summary shape does not match the model")
    out = []
    for M, m in zip(model.matrices, means):
        if np.any(np.diag(M) <= 0):
            raise ValueError("transition matrix has a non-positive diagonal entry")
        out.append(solve_triangular(M, m, lower=False, check_finite=False))
    return out


def reconstruct_level_solve(summary: TraceBatchSummary, model: TransitionModel) -> LabeledTree:
    """Solve each level and round at 0.5 (exact ties round to 0)."""
    x = model.embedding.restrict(solve_levels(summary, model))
    return LabeledTree(model.topology, tuple(int(v > 0.5) for v in x))


def plan_sample_size(n: int, gap: float, delta: float) -> int:
    """Smallest ``T`` with ``2^n exp(-T gap^2 / 2) <= delta``."""
    if not gap > 0:
        raise ValueError("gap must be positive")
    if gap > 1:
        raise ValueError("gap must be at most 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if n < 0:
        raise ValueError("n must be non-negative")
    T = math.ceil(2 * (n * math.log(2) + math.log(1 / delta)) / gap**2)
    # guard against rounding just below an integer
    while 2**n * math.exp(-T * gap**2 / 2) > delta:
        T += 1
    return T


def gap_lower_bound(level: int, q: float, p_prime: float, k: int,
                    channel: Channel | str = Channel.TED) -> float:
    """Guaranteed discriminating gap at first differing level ``level``.

    For TED: ``(1-q)^(l-1) (1-p')^(k l + 1) 2^(-k l) / k^l``. For AON the
    survival prefactor is ``(1-q)^l`` and ``p'`` is replaced by ``q``.
    """
    kl = k * level
    if Channel(channel) is Channel.TED:
        total = (1 - q) ** (level - 1) * (1 - p_prime) ** (kl + 1) * 0.5**kl
    else:
        total = (1 - q) ** level * (1 - q) ** kl * 0.5**kl
    return total / k**level


@dataclass(frozen=True)
class ModulusCheck:
    """Both sides of the modulus inequality for one candidate pair.

    ``weighted_sum`` is ``sum_t |dE_t| prod_m |w_m|^t_m`` and must be at least
    ``genfun_gap`` = ``|E'[A](w*) - E''[A](w*)|``, which in turn equals
    ``prefactor * |B(z*)|``.
    """

    level: int
    z: np.ndarray
    w: np.ndarray
    b_modulus: float
    prefactor: float
    genfun_gap: float
    weighted_sum: float


def modulus_diagnostic(first: LabeledTree, second: LabeledTree, model: TransitionModel,
                       grid: int = 64) -> ModulusCheck:
    """Evaluate the generating-function argument behind the gap bound for a
    pair, with ``z*`` taken as the best point of a torus grid."""
    pair = discriminator(first, second, model)
    lv = pair.level
    radices = model.reference.radices(lv)
    value, point = grid_max_modulus(pair.diff.reshape(radices), grid)
    # grid axes run over digits from most to least significant
    z = point[::-1]
    d = model.depth
    if model.channel is Channel.TED:
        p = np.array([model.table.p[d - lv + m] for m in range(lv)])
    else:
        p = np.full(lv, model.q)
    w = (z - p) / (1 - p)
    dE = model.matrices[lv - 1] @ pair.diff
    weighted = eval_genfun(np.abs(dE), np.abs(w), radices).real
    genfun_gap = abs(eval_genfun(dE, w, radices))
    return ModulusCheck(lv, z, w, value, model.level_scale(lv), genfun_gap, weighted)
