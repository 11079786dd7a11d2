"""``corrspec`` command-line entry point.

Exit codes: 0 success or passing verdict, 1 failing verdict, 2 usage
error, 3 unreadable or invalid input.  Data goes to ``--output`` (default
stdout), diagnostics to stderr.  Every JSON document carries
``"schema": "corrspec/1"`` and is checked against the subcommand's output
schema before it is written.
"""
from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import math
import sys
from typing import Callable, Sequence

import jsonschema
import numpy as np

from . import asymptotic, binary, dpi, io, oracle, regions, spectral
from .errors import CorrspecError
from .probcore import Alphabet, JointDist, Marginal

SCHEMA_ID = "corrspec/1"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 3

_num = {"type": "number"}
_nums = {"type": "array", "items": _num}
_constraint = {"type": "object", "required": ["id", "value", "bound", "passed"],
               "properties": {"id": {"type": "string"}, "value": _num, "bound": _num,
                              "passed": {"type": "boolean"}}}
_report = {"type": "object", "required": ["name", "passed", "constraints", "skipped"],
           "properties": {"name": {"type": "string"}, "passed": {"type": "boolean"},
                          "constraints": {"type": "array", "items": _constraint},
                          "worst": {"anyOf": [_constraint, {"type": "null"}]},
                          "skipped": {"type": "array", "items": {"type": "string"}}}}


def _doc(command: str, props: dict, required: Sequence[str]) -> dict:
    return {"type": "object", "required": ["schema", "command", *required],
            "properties": {"schema": {"const": SCHEMA_ID}, "command": {"const": command}, **props}}


OUTPUT_SCHEMAS = {
    "validate": _doc("validate", {"accept": {"type": "boolean"}, "checks": {"type": "object"},
                                  "reasons": {"type": "array", "items": {"type": "string"}},
                                  "has_zero_marginal": {"type": "boolean"}}, ["accept", "checks"]),
    "spectrum": _doc("spectrum", {"sigma": _nums, "lambdas": _nums, "lambda2": _num,
                                  "valid": {"type": "boolean"}, "decomposes": {"type": "boolean"},
                                  "blocks": {"anyOf": [{"type": "null"}, {"type": "array"}]}},
                     ["sigma", "lambdas", "lambda2", "valid", "decomposes"]),
    "dpi-check": _doc("dpi-check", {"holds": {"type": "boolean"}, "slack": _nums, "sigma_xy": _nums,
                                    "sigma_yz": _nums, "sigma_xz": _nums, "factorization_residual": _num},
                      ["holds", "slack", "factorization_residual"]),
    "necc": _doc("necc", {"report": _report, "lambda2_uv": _num}, ["report", "lambda2_uv"]),
    "nletter": _doc("nletter", {"n": {"type": "integer"}, "base": _nums, "values": _nums, "lambda2": _num},
                    ["n", "base", "values"]),
    "mac-check": _doc("mac-check", {"report": _report, "lambda2_uv": _num, "margins": {"type": "object"},
                                    "spectral_passed": {"type": "boolean"}, "rates_passed": {"type": "boolean"}},
                      ["report", "margins"]),
    "oracle": _doc("oracle", {"best_lambda": _nums, "argmax_index": {"type": "array"},
                              "samples_evaluated": {"type": "integer"}, "seed": {"type": "integer"},
                              "mode": {"enum": ["exhaustive", "random"]}, "n": {"type": "integer"},
                              "lambda2_uv": _num, "max_conditional": _num,
                              "violations": {"type": "object"}, "passed": {"type": "boolean"}},
                   ["best_lambda", "samples_evaluated", "seed", "mode", "violations", "passed"]),
    "rd-region": _doc("rd-region", {"sets": {"type": "array"}, "accepted": {"type": "object"},
                                    "points": {"type": "object"}, "containment": {"type": "array"},
                                    "cross_table": {"type": "object"}, "budget": {"type": "integer"},
                                    "seed": {"type": "integer"}},
                      ["sets", "accepted", "containment", "budget", "seed"]),
}

CSV_HEADERS = {
    "witsenhausen": ("n", "gap", "certified_lower", "lambda2"),
    "binary-bounds": binary.CSV_HEADER,
    "rd-region": ("set", "id", "r1", "r2"),
}

INPUT_HELP = """input documents (JSON):
  joint      {"rows": [labels], "cols": [labels], "mass": [[...]]}
  factored   {"axes": [{"name": "x1", "labels": [...]}, ...], "mass": [flat row-major]}
             axis names: u1..un, v1..vn, x1, x2, q
  chain      {"pxy": joint, "kernel": {"from": [...], "to": [...], "rows": [[...]]}}
  channel    {"x1": [...], "x2": [...], "y": [...], "rows": [[...]]}  (rows x1-major)
  candidate  {"pq": [...], "x1": [...], "x2": [...], "kernel": [q][u][v][x1][x2]}
  distortion {"d1": [[...]], "d2": [[...]]}
"""


class CommandResult:
    def __init__(self, passed: bool, json_doc: dict | None = None, rows=None, header=None):
        self.passed = passed
        self.json_doc = json_doc
        self.rows = rows
        self.header = header


def _spectrum_list(spec) -> list[float]:
    return [float(x) for x in spec.lambdas]


def _report_json(rep: dpi.MembershipReport) -> dict:
    def c(x):
        return {"id": x.id, "value": x.value, "bound": x.bound, "passed": x.passed}
    return {"name": rep.name, "passed": rep.passed, "constraints": [c(x) for x in rep.constraints],
            "worst": c(rep.worst) if rep.worst else None, "skipped": list(rep.skipped)}


def _head(command: str) -> dict:
    return {"schema": SCHEMA_ID, "command": command}


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N, N,M,... or LO..HI, got {text!r}") from None


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _lambda2(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("lambda2 must lie in [0, 1]")
    return v


# subcommand implementations ------------------------------------------------

def cmd_validate(args) -> CommandResult:
    doc = io.read_json(args.input)
    if "tilde" in doc:
        rep = spectral.check_tilde_validity(np.asarray(doc["tilde"], dtype=np.float64), tol=args.tol)
        zero = False
    else:
        joint = io.joint_from_json(doc)
        zero = joint.has_zero_marginal
        rep = spectral.check_tilde_validity(spectral.tilde(joint, restrict_support=zero), tol=args.tol) \
            if not zero else spectral.ValidityReport({}, True, ())
    out = {**_head("validate"), "accept": rep.accept, "checks": rep.checks, "reasons": list(rep.reasons),
           "has_zero_marginal": zero}
    return CommandResult(rep.accept, out)


def cmd_spectrum(args) -> CommandResult:
    joint = io.joint_from_json(io.read_json(args.input))
    t = spectral.tilde(joint, restrict_support=args.restrict_support)
    sig = spectral.singular_values(joint, restrict_support=args.restrict_support)
    valid = spectral.check_tilde_validity(t).accept if not joint.has_zero_marginal else True
    blocks = spectral.decomposes(joint)
    out = {**_head("spectrum"), "sigma": [float(s) for s in sig], "lambdas": [float(s) for s in sig[1:]],
           "lambda2": float(sig[1]) if sig.size > 1 else 0.0, "valid": valid, "decomposes": blocks is not None,
           "blocks": [sorted(blocks[0]), sorted(blocks[1])] if blocks else None}
    return CommandResult(True, out)


def cmd_dpi_check(args) -> CommandResult:
    chain = io.chain_from_json(io.read_json(args.input))
    rep = dpi.check_dpi(chain, tol=args.tol)
    out = {**_head("dpi-check"), "holds": rep.holds, "slack": list(rep.slack),
           "sigma_xy": _spectrum_list(rep.sigma_xy), "sigma_yz": _spectrum_list(rep.sigma_yz),
           "sigma_xz": _spectrum_list(rep.sigma_xz), "factorization_residual": rep.factorization_residual}
    return CommandResult(rep.holds and rep.factorization_residual <= dpi.FACTORIZATION_TOL, out)


def cmd_necc(args) -> CommandResult:
    dist = io.load_distribution(io.read_json(args.input))
    if isinstance(dist, JointDist):
        rep = dpi.necc_check(dist, args.lambda2, tol=args.tol)
    elif args.subsets == "none":
        rep = dpi.necc_check(dist.joint(["x1"], ["x2"]), args.lambda2, tol=args.tol)
    else:
        given = ["q"] if "q" in dist.names else []
        rep = dpi.intersection_membership(dist, args.lambda2, tol=args.tol, extra_given=given)
    out = {**_head("necc"), "report": _report_json(rep), "lambda2_uv": args.lambda2}
    return CommandResult(rep.passed, out)


def cmd_nletter(args) -> CommandResult:
    joint = io.joint_from_json(io.read_json(args.input))
    spec = asymptotic.nletter_spectrum(joint, args.n, args.top_k)
    out = {**_head("nletter"), "n": args.n, "base": list(spec.base), "values": list(spec.values),
           "lambda2": spec.lambda2}
    return CommandResult(True, out)


def cmd_witsenhausen(args) -> CommandResult:
    px = Marginal(Alphabet.of_size(len(args.px1)), np.asarray(args.px1))
    pu = Marginal(Alphabet.of_size(len(args.pu)), np.asarray(args.pu))
    rows, ok = [], True
    for n in args.n:
        rep = asymptotic.verify_certificate(asymptotic.construct_witsenhausen(px, pu, n, args.s1))
        ok &= rep.passed
        rows.append((n, rep.gap, rep.certified_lower, rep.lambda2))
    return CommandResult(ok, rows=rows, header=CSV_HEADERS["witsenhausen"])


def cmd_binary_bounds(args) -> CommandResult:
    rows = list(binary.curve_rows(args.lambda2, args.grid, args.full_grid))
    return CommandResult(True, rows=rows, header=CSV_HEADERS["binary-bounds"])


def cmd_rd_region(args) -> CommandResult:
    sources = io.joint_from_json(io.read_json(args.sources))
    ds = io.distortion_from_json(io.read_json(args.distortion))
    sets = [s.strip() for s in args.set.split(",") if s.strip()]
    cfg = regions.SamplerConfig(budget=args.budget, seed=args.seed, workers=args.workers)
    dmax = tuple(args.max_distortion) if args.max_distortion else (math.inf, math.inf)
    if len(dmax) != 2:
        raise ValueError("--max-distortion takes two values D1,D2")
    sample = regions.rd_region_sample(sources, dmax, ds, sets, cfg)
    containment = [{"smaller": a, "larger": b, "holds": v} for (a, b), v in sample.containment.items()]
    ok = all(c["holds"] for c in containment)
    if args.format == "csv":
        rows = [(s, i, r1, r2) for s in sets for (i, r1, r2) in sample.points(s)]
        for c in containment:
            print(f"containment {c['smaller']} <= {c['larger']}: {'holds' if c['holds'] else 'FAILS'}",
                  file=sys.stderr)
        return CommandResult(ok, rows=rows, header=CSV_HEADERS["rd-region"])
    out = {**_head("rd-region"), "sets": sets, "budget": args.budget, "seed": args.seed,
           "accepted": {s: list(sample.accepted(s)) for s in sets},
           "points": {s: [[i, r1, r2] for i, r1, r2 in sample.points(s)] for s in sets},
           "containment": containment}
    if "sout2" in sets and "sout4" in sets:
        out["cross_table"] = {f"sout2={a},sout4={b}": v for (a, b), v in sample.cross_table().items()}
    return CommandResult(ok, out)


def cmd_mac_check(args) -> CommandResult:
    sources = io.joint_from_json(io.read_json(args.sources))
    channel = io.channel_from_json(io.read_json(args.channel))
    tc = io.candidate_from_json(io.read_json(args.candidate), sources)
    lam = args.lambda2 if args.lambda2 is not None else spectral.lambda2(sources, restrict_support=True)
    rep = regions.mare_check(tc, channel, lam)
    out = {**_head("mac-check"), "report": _report_json(rep), "lambda2_uv": lam,
           "margins": rep.details["margins"], "spectral_passed": rep.details["spectral_passed"],
           "rates_passed": rep.details["rates_passed"]}
    return CommandResult(rep.passed, out)


def cmd_oracle(args) -> CommandResult:
    sources = io.joint_from_json(io.read_json(args.sources))
    res = oracle.frontier(sources, args.n, tuple(int(s) for s in args.sizes), args.budget, args.seed,
                          args.mode, conditional=not args.no_conditional, workers=args.workers)
    out = {**_head("oracle"), "best_lambda": list(res.best_lambda), "argmax_index": res.details["argmax_index"],
           "samples_evaluated": res.samples_evaluated, "seed": res.seed, "mode": res.mode, "n": res.n,
           "lambda2_uv": res.lambda2_uv, "max_conditional": res.max_conditional,
           "violations": {"necc": res.necc_violations, "conditional": res.nec_violations,
                          "outer2": res.outer2_violations, "outer2_checked": res.outer2_checked},
           "passed": res.violations == 0}
    return CommandResult(res.violations == 0, out)


# parser -----------------------------------------------------------------------

def _schema_epilog(command: str) -> str:
    parts = [INPUT_HELP]
    if command in OUTPUT_SCHEMAS:
        parts.append("output schema (JSON):\n" + json.dumps(OUTPUT_SCHEMAS[command], indent=1))
    if command in CSV_HEADERS:
        parts.append("CSV columns: " + ",".join(CSV_HEADERS[command]))
    return "\n\n".join(parts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrspec", description="Correlation spectra of discrete distributions.",
                                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=INPUT_HELP)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, fn: Callable, help_text: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_text, description=help_text, epilog=_schema_epilog(name),
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=fn)
        sp.add_argument("--output", "-o", help="write data here instead of stdout")
        sp.add_argument("--seed", type=_seed, default=0, help="unsigned 64-bit seed (default 0)")
        sp.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
        return sp

    sp = add("validate", cmd_validate, "check a joint (or a {\"tilde\": matrix}) is a valid tilde matrix")
    sp.add_argument("input")
    sp.add_argument("--tol", type=float, default=spectral.SPECTRAL_TOL)

    sp = add("spectrum", cmd_spectrum, "singular values of the tilde matrix of a joint")
    sp.add_argument("input")
    sp.add_argument("--restrict-support", action="store_true", help="drop zero-probability symbols")

    sp = add("dpi-check", cmd_dpi_check, "spectral data-processing inequality along X -> Y -> Z")
    sp.add_argument("input")
    sp.add_argument("--tol", type=float, default=dpi.INEQ_TOL)

    sp = add("necc", cmd_necc, "bound lambda_i(X1,X2) by lambda_2(U,V), conditionally for factored inputs")
    sp.add_argument("input")
    sp.add_argument("--lambda2", type=_lambda2, required=True)
    sp.add_argument("--subsets", choices=("all", "none"), default="all",
                    help="for factored inputs: condition on every subset of source letters (default) or none")
    sp.add_argument("--tol", type=float, default=dpi.INEQ_TOL)

    sp = add("nletter", cmd_nletter, "top singular values of an n-fold Kronecker power")
    sp.add_argument("input")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--top-k", type=int, default=16)

    sp = add("witsenhausen", cmd_witsenhausen, "near-decomposing joints of (X1, U^n) with certified lambda_2")
    sp.add_argument("--px1", type=_floats, required=True)
    sp.add_argument("--pu", type=_floats, required=True)
    sp.add_argument("--n", type=_int_range, required=True, help="N, N,M,... or LO..HI")
    sp.add_argument("--s1", type=lambda t: [int(x) for x in t.split(",")], default=[0])

    sp = add("binary-bounds", cmd_binary_bounds, "binary outer/inner bounds on the signed correlation")
    sp.add_argument("--lambda2", type=_lambda2, required=True)
    sp.add_argument("--grid", type=int, default=99)
    sp.add_argument("--full-grid", action="store_true", help="all (a, b) pairs instead of the a = b diagonal")

    sp = add("rd-region", cmd_rd_region, "sampled rate pairs of test channels in the chosen sets")
    sp.add_argument("--sources", required=True)
    sp.add_argument("--distortion", required=True)
    sp.add_argument("--set", default="sin", help="comma list of " + "|".join(regions.PREDICATES))
    sp.add_argument("--budget", type=int, default=200)
    sp.add_argument("--max-distortion", type=_floats, help="D1,D2 (default: no constraint)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = add("mac-check", cmd_mac_check, "necessary conditions for sending sources over a MAC")
    sp.add_argument("--sources", required=True)
    sp.add_argument("--channel", required=True)
    sp.add_argument("--candidate", required=True)
    sp.add_argument("--lambda2", type=_lambda2, default=None)

    sp = add("oracle", cmd_oracle, "brute-force encoder search against every bound")
    sp.add_argument("--sources", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--mode", choices=("exhaustive", "random"), default="exhaustive")
    sp.add_argument("--budget", type=int, default=100_000)
    sp.add_argument("--sizes", type=_floats, default=[2, 2])
    sp.add_argument("--no-conditional", action="store_true")
    return p


def _render(res: CommandResult, command: str) -> str:
    if res.json_doc is not None:
        jsonschema.validate(res.json_doc, OUTPUT_SCHEMAS[command])
        return json.dumps(res.json_doc, indent=2) + "\n"
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(res.header)
    w.writerows(res.rows)
    return buf.getvalue()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        res = args.func(args)
        text = _render(res, args.command)
    except (CorrspecError, io.InputError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"corrspec {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not res.passed:
        print(f"corrspec {args.command}: verdict FAIL", file=sys.stderr)
    return EXIT_OK if res.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
