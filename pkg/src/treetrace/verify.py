"""Self-checks run by ``treetrace verify``: closed forms against enumeration
and structural invariants of the transition matrices."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .analytic import build_transition_model
from .channels import Channel, ChannelConfig, apply_ted, make_rng, sample_masks
from .oracle import contract_recursive, exact_expected_subtrace
from .subtrace import BatchAugmenter
from .tree import LabeledTree, Topology, digit_table


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}".rstrip()


QUICK_CASES = [
    (Topology.complete(2, 2), Channel.TED),
    (Topology.complete(2, 2), Channel.AON),
    (Topology.from_arities([2, 3]), Channel.TED),
    (Topology.from_arities([2, 3]), Channel.AON),
    (Topology((2, 2, 1, 0, 0, 0)), Channel.AON),
]

FULL_CASES = QUICK_CASES + [
    (Topology.from_arities([3, 3]), Channel.TED),
    (Topology.from_arities([2, 5]), Channel.AON),
    (Topology((3, 2, 0, 3, 1, 0, 0, 2, 0, 0, 0, 0)), Channel.AON),
]


def _perturb(levels, fault: bool):
    if not fault:
        return levels
    out = [v.copy() for v in levels]
    out[-1][0] += 1e-6
    return out


def check_oracle(cases, qs, labelings: int, seed: int, fault: bool = False) -> CheckResult:
    rng = make_rng(seed, 0)
    worst = 0.0
    for topo, model in cases:
        for q in qs:
            cfg = ChannelConfig(model, q)
            tm = build_transition_model(topo, cfg)
            for _ in range(labelings):
                tree = LabeledTree(topo, tuple(int(b) for b in rng.integers(0, 2, topo.n)))
                exact = exact_expected_subtrace(tree, cfg)
                analytic = _perturb(tm.expected_levels(tree.labels), fault)
                for a, b in zip(analytic, exact.levels):
                    worst = max(worst, float(np.abs(a - b).max()))
    return CheckResult(f"oracle equivalence ({len(cases)} shapes)", worst <= 1e-10,
                       f"max abs err {worst:.2e}")


def check_matrices(cases, qs, fault: bool = False) -> list[CheckResult]:
    cons, tri = 0.0, True
    for topo, model in cases:
        for q in qs:
            tm = build_transition_model(topo, ChannelConfig(model, q))
            mats = _perturb(list(tm.matrices), fault)
            for lv, M in enumerate(mats, start=1):
                cons = max(cons, float(np.abs(M.sum(axis=0) - tm.level_scale(lv)).max()))
                dig = digit_table(tm.reference.radices(lv))
                dominated = np.all(dig[:, :, None] <= dig[:, None, :], axis=0)
                tri &= bool(np.all(M[~dominated] == 0.0)) and bool(np.all(np.diag(M) > 0))
    return [
        CheckResult("column sums equal survival probability", cons <= 1e-12, f"max dev {cons:.2e}"),
        CheckResult("digitwise triangularity", tri),
    ]


def check_ted_rules() -> CheckResult:
    topo = Topology((2, 2, 1, 0, 0, 0))
    tree = LabeledTree(topo, (1, 0, 1, 1, 0))
    bad = 0
    for bits in itertools.product((False, True), repeat=topo.n):
        if apply_ted(tree, bits) != contract_recursive(tree, bits):
            bad += 1
    return CheckResult("TED contraction matches recursive definition", bad == 0, f"{bad} mismatches")


def check_monte_carlo(seed: int) -> CheckResult:
    topo = Topology.complete(2, 2)
    q, count = 0.5, 100_000
    tm = build_transition_model(topo, ChannelConfig(Channel.TED, q))
    present, _ = BatchAugmenter(topo, Channel.TED).positions(
        sample_masks(topo, q, make_rng(seed, 1), count))
    ok = True
    details = []
    for lv, pres in enumerate(present, start=1):
        p = tm.level_scale(lv)
        freq = pres[:, 0].mean()
        se = np.sqrt(p * (1 - p) / count)
        ok &= abs(freq - p) <= 3 * se
        details.append(f"l{lv}: {freq:.4f} vs {p:.4f}")
    return CheckResult("Monte Carlo survival frequency", bool(ok), "; ".join(details))


def run_checks(level: str = "quick", fault: bool = False, seed: int = 0) -> list[CheckResult]:
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    if level == "quick":
        results = [check_oracle(QUICK_CASES, (0.1, 0.3), 3, seed, fault)]
        results += check_matrices(QUICK_CASES, (0.1, 0.3, 0.5), fault)
        results.append(check_ted_rules())
        return results
    results = [check_oracle(FULL_CASES, (0.1, 0.25, 0.4), 5, seed, fault)]
    results += check_matrices(FULL_CASES, (0.1, 0.25, 0.4, 0.5), fault)
    results.append(check_ted_rules())
    results.append(check_monte_carlo(seed))
    return results
