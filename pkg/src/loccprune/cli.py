"""Command-line interface: ``locc info|validate|prune|gen|compare``.

Exit codes: 0 success, 1 validation or post-condition failure, 2 input
parse error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import serialization as ser
from .analysis import BoundViolation, bounds
from .channels import ChannelError, SpanError, channel_distance, minimal_rep
from .compress import MODES, PostConditionError, prune
from .harness import SCHEDULES, GenerationError, GenSpec, generate_tree, inject_redundancy
from .numerics import DEFAULT_TOL, Tolerances
from .trees import ITEMS, InvalidTreeError, TreeStructureError, implemented_kraus, validate

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_NUMERIC = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _tolerances(args) -> Tolerances:
    return Tolerances(
        tol_rank=args.tol_rank, tol_psd=args.tol_psd, tol_eq=args.tol_eq, tol_zero=args.tol_zero
    )


def _load_any(path, tol):
    """A channel file, or a tree file read as its minimal channel plus the tree."""
    doc = ser.read_json(path)
    fmt = doc.get("format") if isinstance(doc, dict) else None
    if fmt == ser.TREE_FORMAT:
        tree = ser.tree_from_dict(doc, tol)
        return tree.rep.channel, tree
    return ser.channel_from_dict(doc, tol), None


def _emit(args, doc: dict, text: str):
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        print(text)


def cmd_info(args) -> int:
    tol = _tolerances(args)
    channel, tree = _load_any(args.channel, tol)
    rep = tree.rep if tree is not None else minimal_rep(channel, tol)
    try:
        report = bounds(rep, args.np, tol)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_PARSE) from None
    lines = [
        f"D                  {report.D}",
        f"dims               {report.dims}",
        f"kappa              {report.kappa}",
        f"chi                {report.chi}",
        f"extreme            {str(report.is_extreme).lower()}",
        f"kappa^2 bound      {report.thm2_bound}",
        "party  d  d^2+kappa^2-chi  effective",
    ]
    for p, (d, b3, eff) in enumerate(zip(report.dims, report.thm3_bounds, report.effective_bounds)):
        lines.append(f"{p:5d}  {d}  {b3:15d}  {eff:9d}")
    if report.n_p is not None:
        lines.append(
            f"rounds >= {report.round_lower_bound:.6g} (integer {report.round_lower_bound_int})"
            f" for N_p = {report.n_p}"
        )
    _emit(args, ser.bounds_to_dict(report), "\n".join(lines))
    return EXIT_OK


def _validation_text(report) -> str:
    lines = ["item  status  max_residual  offenders"]
    for k in ITEMS:
        r = report.items[k]
        offenders = ", ".join(f"{nid} ({res:.2e})" for nid, res in r.offenders[:5])
        if len(r.offenders) > 5:
            offenders += f", ... (+{len(r.offenders) - 5})"
        status = "pass" if r.passed else "FAIL"
        lines.append(f"{k:4s}  {status:6s}  {r.max_residual:12.3e}  {offenders}")
    lines.append("overall: " + ("pass" if report.passed else "FAIL"))
    return "\n".join(lines)


def cmd_validate(args) -> int:
    tol = _tolerances(args)
    tree = ser.load_tree(args.tree, tol)
    report = validate(tree, tol)
    _emit(args, report.to_dict(), _validation_text(report))
    return EXIT_OK if report.passed else EXIT_FAIL


def _prune_text(report) -> str:
    lines = [
        f"mode               {report.mode}",
        f"removals           {report.iterations}",
        f"kappa              {report.kappa_in} -> {report.kappa_out}",
    ]
    if report.channel_residual is not None:
        lines.append(f"channel residual   {report.channel_residual:.3e}")
    if report.isometry_residual is not None:
        lines.append(f"isometry residual  {report.isometry_residual:.3e}")
    lines.append("node  outcomes_before  outcomes_after")
    for nid, (before, after) in report.outcome_histogram.items():
        lines.append(f"{nid}  {before}  {after}")
    return "\n".join(lines)


def cmd_prune(args) -> int:
    tol = _tolerances(args)
    tree = ser.load_tree(args.tree, tol)
    try:
        out, report = prune(tree, args.mode, tol)
    except InvalidTreeError as exc:
        raise CliError(f"input rejected: {exc}", EXIT_FAIL) from None
    except PostConditionError as exc:
        if args.report:
            ser.write_json(args.report, ser.prune_report_to_dict(exc.report))
        raise CliError(f"post-condition failure: {exc}", EXIT_FAIL) from None
    ser.save_tree(out, args.output)
    if args.report:
        ser.write_json(args.report, ser.prune_report_to_dict(report))
    _emit(args, ser.prune_report_to_dict(report), _prune_text(report))
    return EXIT_OK


def _parse_int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_gen(args) -> int:
    tol = _tolerances(args)
    if args.config:
        spec, splits = ser.gen_spec_from_dict(ser.read_json(args.config))
        if args.inject is not None:
            splits = args.inject
    else:
        missing = [f for f in ("dims", "rounds", "seed") if getattr(args, f) is None]
        if missing:
            raise CliError(f"gen needs --{', --'.join(missing)} (or --config)", EXIT_PARSE)
        outcomes = args.outcomes if args.outcomes is not None else [3]
        try:
            spec = GenSpec(
                dims=tuple(args.dims),
                rounds=args.rounds,
                outcomes=outcomes[0] if len(outcomes) == 1 else tuple(outcomes),
                party_schedule=args.schedule,
                seed=args.seed,
            )
        except ValueError as exc:
            raise CliError(str(exc), EXIT_PARSE) from None
        splits = args.inject or 0
    tree = generate_tree(spec, tol)
    if splits:
        tree = inject_redundancy(tree, splits, np.random.default_rng([spec.seed, splits]))
    ser.save_tree(tree, args.output)
    print(f"wrote {args.output}: kappa={tree.kappa}, leaves={len(tree.leaves())}")
    return EXIT_OK


def cmd_compare(args) -> int:
    tol = _tolerances(args)
    channels = []
    for path in (args.a, args.b):
        channel, tree = _load_any(path, tol)
        channels.append(implemented_kraus(tree, tol) if tree is not None else channel)
    try:
        dist = channel_distance(*channels)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_PARSE) from None
    same = dist <= tol.tol_eq
    _emit(
        args,
        {"choi_distance": dist, "same_channel": same, "tol_eq": tol.tol_eq},
        f"choi distance {dist:.3e} ({'same' if same else 'different'} channel at tol {tol.tol_eq:g})",
    )
    return EXIT_OK if same else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-rank", type=float, default=DEFAULT_TOL.tol_rank)
    common.add_argument("--tol-psd", type=float, default=DEFAULT_TOL.tol_psd)
    common.add_argument("--tol-eq", type=float, default=DEFAULT_TOL.tol_eq)
    common.add_argument("--tol-zero", type=float, default=DEFAULT_TOL.tol_zero)
    common.add_argument("--json", action="store_true", help="print the machine-readable report")

    parser = argparse.ArgumentParser(
        prog="locc", description="Validate, prune and analyze LOCC protocol trees."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", parents=[common], help="Kraus rank, chi and outcome bounds")
    p.add_argument("channel", help="locc-channel/1 (or locc-tree/1) file")
    p.add_argument("--np", type=int, default=None, help="product Kraus count N_p for the round bound")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("validate", parents=[common], help="check every tree condition")
    p.add_argument("tree")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("prune", parents=[common], help="prune sibling dependencies")
    p.add_argument("tree")
    p.add_argument("--mode", choices=MODES, default="channel")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--report", default=None, help="write a locc-prune-report/1 file")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("gen", parents=[common], help="generate a random valid tree")
    p.add_argument("--dims", type=_parse_int_list)
    p.add_argument("--rounds", type=int)
    p.add_argument("--outcomes", type=_parse_int_list, help="one count, or one per round")
    p.add_argument("--schedule", choices=SCHEDULES, default="round-robin")
    p.add_argument("--seed", type=int)
    p.add_argument("--inject", type=int, default=None, help="proportional redundancy splits")
    p.add_argument("--config", default=None, help="locc-gen/1 file")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("compare", parents=[common], help="Choi distance of two channels or trees")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ser.FormatError, ChannelError, TreeStructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InvalidTreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (BoundViolation, GenerationError, SpanError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
