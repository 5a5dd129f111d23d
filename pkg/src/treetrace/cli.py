"""Command-line front end.

Exit codes: 0 ok, 1 reconstruction failure, 2 invalid input, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from typing import Sequence

import numpy as np

from .analytic import build_transition_model, solve_p_prime
from .channels import Channel, Trace, apply_channel
from .experiment import ExperimentSpec, planted_and_masks, rows_to_csv, run_experiment
from .reconstruct import (
    CandidateScan,
    ReconstructionResult,
    TraceBatchSummary,
    reconstruct_exhaustive,
    reconstruct_level_solve,
)
from .subtrace import augment, extract_subtrace, reference_embedding
from .tree import TopologyError
from .verify import run_checks

EXIT_OK, EXIT_FAILURE, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2, 3

SPEC_FIELDS = {f.name for f in fields(ExperimentSpec)}


class InputError(Exception):
    pass


def _add_spec_options(p: argparse.ArgumentParser) -> None:
    # defaults stay None so that config-file values are only overridden by explicit flags
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--model", choices=[c.value for c in Channel])
    p.add_argument("--q", type=float, help="deletion probability")
    p.add_argument("--k", type=int, help="arity of a complete k-ary tree")
    p.add_argument("--depth", type=int, help="depth of a complete k-ary tree")
    p.add_argument("--arities", type=int, nargs="+", help="level arities k_0 .. k_{d-1}")
    p.add_argument("--tree", help="tree JSON file giving the topology (and labels)")
    p.add_argument("--labels", help="random | ones | zeros | file")
    p.add_argument("--traces", type=int, nargs="+", help="trace counts T")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--estimator", choices=["level-solve", "exhaustive"])
    p.add_argument("--out", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treetrace",
                                     description="Tree trace reconstruction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write sampled traces as JSON lines")
    _add_spec_options(p)
    p.add_argument("--planted", help="also write the planted tree to this path")

    p = sub.add_parser("expect", help="print the closed-form model as JSON")
    _add_spec_options(p)
    p.add_argument("--c", type=int, help="integer c for the p' bound")

    p = sub.add_parser("reconstruct", help="reconstruct labels from trace files")
    _add_spec_options(p)
    p.add_argument("--input", action="append", required=True,
                   help="JSON-lines trace file ('-' for stdin); repeatable")

    p = sub.add_parser("experiment", help="success-rate sweep over trace counts, as CSV")
    _add_spec_options(p)
    p.add_argument("--workers", type=int, help="worker processes (default: $TREETRACE_WORKERS or CPU count)")
    p.add_argument("--timing", action="store_true", default=None,
                   help="fill the wallclock_ms column (makes output run-dependent)")

    p = sub.add_parser("verify", help="run self-checks")
    p.add_argument("level", nargs="?", default="quick", choices=["quick", "full"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", action="store_true",
                   help="perturb the closed-form side to exercise the failure path")
    return parser


def resolve_spec(args: argparse.Namespace) -> ExperimentSpec:
    values = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config: {exc}") from exc
        unknown = set(cfg) - SPEC_FIELDS
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        values.update(cfg)
    for name in SPEC_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if isinstance(values.get("traces"), int):
        values["traces"] = [values["traces"]]
    # an explicit topology source replaces the default complete binary tree
    if ("arities" in values or "tree" in values) and "k" not in values:
        values["k"] = None
    spec = ExperimentSpec(**values)
    spec.validate()
    return spec


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    spec = resolve_spec(args)
    topo, _ = spec.topology()
    cfg = spec.channel()
    ref = reference_embedding(topo).target
    planted, masks = planted_and_masks(spec, topo, 0, spec.traces[0])
    lines = []
    for mask in masks:
        trace = apply_channel(planted, mask, cfg.model)
        outcome = extract_subtrace(trace, topo.depth) if cfg.model is Channel.TED else trace
        lines.append(json.dumps({"trace": trace.to_json(),
                                 "subtrace": augment(outcome, ref).to_json()}))
    _emit("".join(line + "\n" for line in lines), spec.out)
    if args.planted:
        with open(args.planted, "w") as fh:
            json.dump(planted.to_json(), fh)
            fh.write("\n")
    return EXIT_OK


def _default_c(q: float) -> int:
    c = 1
    while q >= c / (c + 1):
        c += 1
    return c


def cmd_expect(args) -> int:
    spec = resolve_spec(args)
    topo, _ = spec.topology()
    cfg = spec.channel()
    model = build_transition_model(topo, cfg)
    report = {
        "model": cfg.model.value,
        "q": cfg.q,
        "child_counts": list(topo.child_counts),
        "reference_child_counts": list(model.reference.child_counts),
        "node_survival": [model.level_scale(lv) for lv in range(1, model.depth + 1)],
        "matrices": [M.tolist() for M in model.matrices],
    }
    if cfg.model is Channel.TED:
        c = args.c if args.c is not None else _default_c(cfg.q)
        report["p"] = list(model.table.p)
        report["c"] = c
        hypotheses = cfg.q < c / (c + 1) and topo.k_min > c
        report["p_prime"] = solve_p_prime(c, cfg.q) if hypotheses else None
    if args.labels is not None or args.tree is not None:
        planted, _ = planted_and_masks(spec, topo, 0, 0)
        report["labels"] = list(planted.labels)
        report["expected"] = [v.tolist() for v in model.expected_levels(planted.labels)]
    _emit(json.dumps(report, indent=1) + "\n", spec.out)
    return EXIT_OK


def read_traces(paths: Sequence[str]):
    for path in paths:
        fh = sys.stdin if path == "-" else open(path)
        try:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    yield Trace.from_json(obj.get("trace", obj))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise InputError(f"{path}:{lineno}: bad trace: {exc}") from exc
        finally:
            if fh is not sys.stdin:
                fh.close()


def cmd_reconstruct(args) -> int:
    spec = resolve_spec(args)
    topo, _ = spec.topology()
    cfg = spec.channel()
    model = build_transition_model(topo, cfg)
    summary = TraceBatchSummary.for_model(model)
    acc = [np.zeros(s) for s in summary.shape]
    count = 0
    for trace in read_traces(args.input):
        if cfg.model is Channel.TED:
            trace = extract_subtrace(trace, topo.depth)
        for a, v in zip(acc, augment(trace, model.reference).levels):
            a += v
        count += 1
    if count == 0:
        raise InputError("no traces read")
    summary = summary.add_sums(acc, count)
    if spec.estimator == "exhaustive":
        result = reconstruct_exhaustive(summary, model, CandidateScan(model))
    else:
        result = ReconstructionResult(reconstruct_level_solve(summary, model), "ok",
                                      count, "level-solve")
    _emit(json.dumps(result.to_json()) + "\n", spec.out)
    return EXIT_OK if result.ok else EXIT_FAILURE


def cmd_experiment(args) -> int:
    spec = resolve_spec(args)
    _emit(rows_to_csv(run_experiment(spec)), spec.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(args.level, fault=args.inject_fault, seed=args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


COMMANDS = {
    "simulate": cmd_simulate,
    "expect": cmd_expect,
    "reconstruct": cmd_reconstruct,
    "experiment": cmd_experiment,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, TopologyError, ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
