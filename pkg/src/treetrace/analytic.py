"""Closed-form expectations of augmented subtraces.

For level ``l`` the expected augmented-subtrace vector is a linear map of the
original level labels, ``E[Z_l] = M_l b_l``. ``M_l[j, i]`` is the probability
that the node at position ``i`` lands in position ``j``; it vanishes unless
``j <= i`` digitwise, and factorizes over digits, so ``M_l`` is a scaled
Kronecker product of small per-digit kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, prod
from typing import Sequence

import numpy as np
from scipy.optimize import bisect

from .channels import Channel, ChannelConfig
from .subtrace import Embedding, reference_embedding
from .tree import LabeledTree, NodeAddress, Topology, TopologyError

DEFAULT_MAX_ENTRIES = 10**6


@dataclass(frozen=True)
class SurvivalTable:
    """``p[h]``: probability that a height-``h`` subtree (its root included)
    leaves no full-depth path in the subtrace."""

    q: float
    p: tuple[float, ...]
    p_prime: float | None = None

    @property
    def depth(self) -> int:
        return len(self.p)


def survival_recurrence(q: float, arities: int | Sequence[int], d: int | None = None) -> SurvivalTable:
    """``p_0 = q`` and ``p_{h+1} = q + (1-q) p_h^{k_{d-h-1}}``.

    ``arities`` are the top-down level arities ``(k_0, ..., k_{d-1})``; a
    single int means a complete k-ary tree of depth ``d``.
    """
    if not 0.0 <= q < 1.0:
        raise ValueError(f"deletion probability must lie in [0, 1), got {q}")
    if isinstance(arities, (int, np.integer)):
        if d is None:
            raise ValueError("depth is required for a uniform arity")
        arities = [int(arities)] * d
    arities = [int(k) for k in arities]
    if d is None:
        d = len(arities)
    if len(arities) != d or d < 1 or min(arities) < 1:
        raise ValueError("need d positive arities")
    p = [q]
    for h in range(d - 1):
        p.append(q + (1 - q) * p[h] ** arities[d - h - 1])
    return SurvivalTable(q, tuple(p))


def solve_p_prime(c: int, q: float) -> float:
    """Root in (0, 1) of ``1 + p + ... + p^c = 1/(1-q)``.

    Every ``p_h`` of a tree whose non-leaf arities all exceed ``c`` stays
    below this value when ``q < c/(c+1)``.
    """
    if c < 1:
        raise ValueError("c must be a positive integer")
    if not 0.0 <= q < c / (c + 1):
        raise ValueError(f"need 0 <= q < c/(c+1) = {c / (c + 1):.6g}, got q={q}")
    if q == 0.0:
        return 0.0
    target = 1.0 / (1.0 - q)
    return bisect(lambda p: sum(p**m for m in range(c + 1)) - target, 0.0, 1.0,
                  xtol=1e-15, maxiter=200)


def node_survival_prob(level: int, table: SurvivalTable) -> float:
    """Probability that a level-``level`` node of a level-regular tree
    survives in the TED subtrace."""
    d = table.depth
    if not 1 <= level <= d:
        raise ValueError(f"level {level} outside 1..{d}")
    return (1 - table.q) ** (level - 1) * (1 - table.p[d - level])


def _digit_factor(i: int, j: int, p: float) -> float:
    if j > i:
        return 0.0
    return comb(i, j) * p ** (i - j) * (1 - p) ** j


def transition_prob_ted(i: NodeAddress, j: NodeAddress, table: SurvivalTable) -> float:
    """P(subtrace slot ``j`` holds the original bit at ``i``) under TED."""
    if i.level != j.level:
        raise ValueError("addresses lie on different levels")
    d, lv = table.depth, i.level
    if lv > d:
        raise ValueError(f"level {lv} deeper than the table depth {d}")
    out = node_survival_prob(lv, table)
    # digits[a] is the sibling position of the level-(a+1) ancestor, height d-1-a
    for a, (ia, ja) in enumerate(zip(i.digits, j.digits)):
        out *= _digit_factor(ia, ja, table.p[d - 1 - a])
    return out


def transition_prob_aon(i: NodeAddress, j: NodeAddress, q: float) -> float:
    """P(augmented-trace slot ``j`` holds the original bit at ``i``) under AON."""
    if i.level != j.level:
        raise ValueError("addresses lie on different levels")
    out = (1 - q) ** i.level
    for ia, ja in zip(i.digits, j.digits):
        out *= _digit_factor(ia, ja, q)
    return out


def digit_kernel(k: int, p: float) -> np.ndarray:
    """``K[j, i] = C(i, j) p^(i-j) (1-p)^j`` for ``j <= i < k``."""
    K = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1):
            K[j, i] = _digit_factor(i, j, p)
    return K


@dataclass(frozen=True)
class TransitionModel:
    channel: Channel
    q: float
    embedding: Embedding
    matrices: tuple[np.ndarray, ...]
    table: SurvivalTable | None = None

    @property
    def topology(self) -> Topology:
        return self.embedding.source

    @property
    def reference(self) -> Topology:
        return self.embedding.target

    @property
    def depth(self) -> int:
        return len(self.matrices)

    def level_scale(self, level: int) -> float:
        """Common column sum of ``M_level``: the survival probability of a node."""
        if self.channel is Channel.TED:
            return node_survival_prob(level, self.table)
        return (1 - self.q) ** level

    def expected_levels(self, labels: Sequence[int] | np.ndarray) -> list[np.ndarray]:
        """``M_l b_l`` for flat source labels (any real values, not only 0/1)."""
        lifted = self.embedding.lift(np.asarray(labels, dtype=np.float64))
        return [M @ b for M, b in zip(self.matrices, lifted)]


def build_transition_model(topo: Topology, cfg: ChannelConfig,
                           max_entries: int = DEFAULT_MAX_ENTRIES) -> TransitionModel:
    q = cfg.q
    if cfg.model is Channel.TED:
        if not topo.is_level_regular:
            raise TopologyError("TED expectations are only available for level-regular topologies")
        emb = reference_embedding(topo)
        table = survival_recurrence(q, topo.level_arities)
    else:
        emb = reference_embedding(topo)
        table = None
    arities = emb.target.level_arities
    d = len(arities)
    mats = []
    for lv in range(1, d + 1):
        size = prod(arities[:lv])
        if size * size > max_entries:
            raise ValueError(
                f"level {lv} matrix has {size * size} entries, above the cap of {max_entries}"
            )
        if cfg.model is Channel.TED:
            scale = node_survival_prob(lv, table)
            kernels = [digit_kernel(arities[a], table.p[d - 1 - a]) for a in range(lv)]
        else:
            scale = (1 - q) ** lv
            kernels = [digit_kernel(arities[a], q) for a in range(lv)]
        M = np.ones((1, 1))
        for K in kernels:
            M = np.kron(M, K)
        mats.append(scale * M)
    return TransitionModel(cfg.model, q, emb, tuple(mats), table)


def expected_subtrace(tree: LabeledTree, model: TransitionModel) -> list[np.ndarray]:
    if tree.topology != model.topology:
        raise ValueError("tree topology does not match the transition model")
    return model.expected_levels(tree.labels)


def eval_genfun(level_values, w, radices: Sequence[int]) -> complex:
    """``sum_t a_t prod_m w_m^{t_m}`` where ``t_m`` is the digit of weight
    ``m`` (``w[0]`` pairs with the last, least significant digit)."""
    values = np.asarray(level_values)
    w = np.asarray(w, dtype=complex)
    radices = tuple(int(k) for k in radices)
    if values.shape != (prod(radices),):
        raise ValueError(f"expected {prod(radices)} values, got shape {values.shape}")
    if w.shape != (len(radices),):
        raise ValueError(f"expected {len(radices)} variables, got {w.shape}")
    acc = values.astype(complex).reshape(radices)
    for m, k in enumerate(reversed(radices)):
        acc = acc @ (w[m] ** np.arange(k))
    return complex(acc)


def expected_genfun(level_labels, w, level: int, model: TransitionModel) -> complex:
    """Closed form of ``E[A_level(w)]`` for reference-level labels ``b``:
    the labels' own generating function at shifted arguments, times the
    survival prefactor."""
    w = np.asarray(w, dtype=complex)
    radices = model.reference.radices(level)
    d = model.depth
    if model.channel is Channel.TED:
        p = np.array([model.table.p[d - level + m] for m in range(level)])
    else:
        p = np.full(level, model.q)
    shifted = (1 - p) * w + p
    return model.level_scale(level) * eval_genfun(level_labels, shifted, radices)


def grid_max_modulus(coeffs, grid: int) -> tuple[float, np.ndarray]:
    """Max of ``|F|`` over the ``grid``-th roots of unity in every variable.

    ``coeffs[t_0, t_1, ...]`` multiplies ``z_0^t_0 z_1^t_1 ...``. Returns the
    value and the maximizing point. This is a lower bound on the sup over the
    torus.
    """
    if grid < 1:
        raise ValueError("grid must be positive")
    F = np.asarray(coeffs, dtype=complex)
    roots = np.exp(2j * np.pi * np.arange(grid) / grid)
    for s in F.shape:
        V = roots[:, None] ** np.arange(s)[None, :]
        F = np.tensordot(F, V, axes=([0], [1]))
    mod = np.abs(F)
    flat = int(np.argmax(mod))
    idx = np.unravel_index(flat, mod.shape)
    return float(mod.flat[flat]), roots[list(idx)]


def littlewood_grid_max(coeffs, grid: int) -> float:
    c = np.asarray(coeffs)
    if not np.all(np.isin(c, (-1, 0, 1))):
        raise ValueError("coefficients must lie in {-1, 0, 1}")
    if not np.any(c):
        raise ValueError("polynomial is identically zero")
    return grid_max_modulus(c, grid)[0]
