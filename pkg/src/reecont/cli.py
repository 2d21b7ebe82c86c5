"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 solver nonconvergence,
4 inequality violation, 5 set-membership violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone

from . import continuity
from .errors import ConvergenceFailure, NotInSet, ReeError, SamplingExhausted
from .sets import DEFAULT_X, ConvexSetSpec
from .solver import SolverOptions, ree
from .states import BipartiteDims, load_state, save_state, validate_density

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGENCE = 3
EXIT_VIOLATION = 4
EXIT_NOT_IN_SET = 5


class InputError(Exception):
    pass


def _dims(text: str) -> BipartiteDims:
    try:
        return BipartiteDims.parse(text)
    except ReeError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _schedule(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"schedule must be comma-separated integers: {text!r}") from exc
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("schedule entries must be positive integers")
    return values


def _common(p: argparse.ArgumentParser, seed: bool = True) -> None:
    p.add_argument("--set", dest="set_kind", choices=["sep", "ppt"], default="sep", help="convex set D")
    p.add_argument("--x", type=float, default=DEFAULT_X, help="mixing weight of the regularized problem")
    p.add_argument("--gap-tol", type=float, default=1e-6, help="Frank-Wolfe gap target (nats)")
    p.add_argument("--restarts", type=int, default=32, help="random restarts of the SEP oracle")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--units", choices=["nats", "bits"], default="nats")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--deterministic", action="store_true", help="omit timestamps and timings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reecont",
        description="Relative entropy of entanglement with certified bounds, and continuity checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="certified interval for one state")
    p.add_argument("state", help="state file (JSON)")
    p.add_argument("--dims", type=_dims, help="override the dims stored in the file")
    p.add_argument("--minimizer-out", help="write the closest state found to this file")
    _common(p)

    p = sub.add_parser("continuity", help="continuity bound on sampled pairs")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--dims", type=_dims, default=BipartiteDims(2, 2))
    p.add_argument("--no-proof-chain", action="store_true", help="skip the intermediate inequalities")
    _common(p)

    p = sub.add_parser("corollary", help="closest states along a sequence converging into the set")
    p.add_argument("--state", required=True, help="base state file (must lie in the set)")
    p.add_argument("--direction", required=True, help="direction state file")
    p.add_argument("--schedule", type=_schedule, default=list(continuity.DEFAULT_SCHEDULE))
    p.add_argument("--dist-tol", type=float, default=0.05)
    _common(p, seed=True)

    p = sub.add_parser("fannes", help="entropy continuity bound on sampled pairs")
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--dims", type=_dims, default=BipartiteDims(2, 2))
    p.add_argument("--independent", type=int, default=0, help="extra unconditioned pairs (skipped when T > 1/3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--output", "-o")
    p.add_argument("--deterministic", action="store_true")

    p = sub.add_parser("proofchain", help="intermediate inequalities on sampled pairs")
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--dims", type=_dims, default=BipartiteDims(2, 2))
    _common(p)
    return parser


def _options(args) -> SolverOptions:
    return SolverOptions(x=args.x, gap_tol=args.gap_tol, restarts=args.restarts, seed=getattr(args, "seed", 0))


def _units(args) -> float:
    return math.log(2.0) if getattr(args, "units", "nats") == "bits" else 1.0


def _emit(args, payload, text: str | None = None) -> None:
    if text is None:
        if not args.deterministic:
            payload = {"generatedAt": datetime.now(timezone.utc).isoformat(), **payload}
        text = json.dumps(payload, indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path, dims=None):
    try:
        state = load_state(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg})") from exc
    if dims is not None and dims != state.dims:
        state = validate_density(state.matrix, dims)
    return state


def cmd_compute(args) -> int:
    state = _load(args.state, args.dims)
    spec = ConvexSetSpec(args.set_kind, state.dims)
    units = _units(args)
    try:
        cv = ree(state, spec, _options(args))
    except ConvergenceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.partial is not None:
            print(f"partial interval [{exc.partial.lower / units:.9g}, {exc.partial.upper / units:.9g}]", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    if args.minimizer_out:
        save_state(cv.minimizer, args.minimizer_out)
    report = {"set": spec.kind, "dims": list(state.dims), "units": args.units, **cv.to_dict(units)}
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(report), lineterminator="\n")
        writer.writeheader()
        writer.writerow({**report, "dims": "x".join(map(str, state.dims))})
        _emit(args, None, buf.getvalue())
    else:
        _emit(args, report)
    return EXIT_OK


def _batch(args, proof_chain: bool):
    spec = ConvexSetSpec(args.set_kind, args.dims)
    return continuity.batch_report(
        args.pairs, args.dims, spec=spec, opts=_options(args), seed=args.seed, proof_chain=proof_chain
    )


def _nonconverged(reports) -> int:
    return sum(1 for r in reports if not r.skipped and not (r.E1.converged and r.E2.converged))


def cmd_continuity(args) -> int:
    batch = _batch(args, proof_chain=not args.no_proof_chain)
    units = _units(args)
    if args.format == "csv":
        _emit(args, None, continuity.reports_csv(batch.reports, units))
    else:
        _emit(args, batch.to_dict(units, deterministic=args.deterministic))
    print(batch.summary(), file=sys.stderr)
    if batch.failures:
        return EXIT_VIOLATION
    return EXIT_NONCONVERGENCE if _nonconverged(batch.reports) else EXIT_OK


def cmd_corollary(args) -> int:
    sigma = _load(args.state)
    direction = _load(args.direction)
    spec = ConvexSetSpec(args.set_kind, sigma.dims)
    trace = continuity.corollary_trace(
        sigma, direction, args.schedule, spec, _options(args), dist_tol=args.dist_tol
    )
    units = _units(args)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "stateDistance", "closestDistance", "eUpper"])
        for e in trace.entries:
            writer.writerow([e.n, repr(e.state_distance), repr(e.closest_distance), repr(e.e_upper / units)])
        _emit(args, None, buf.getvalue())
    else:
        _emit(args, trace.to_dict(units))
    return EXIT_OK if trace.criterion_met else EXIT_VIOLATION


def cmd_fannes(args) -> int:
    cases = continuity.fannes_suite(args.pairs, args.dims, seed=args.seed, independent=args.independent)
    violations = sum(1 for c in cases if c.holds is False)
    skipped = sum(1 for c in cases if c.skipped)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["label", "T", "lhs", "rhs", "holds"])
        for c in cases:
            writer.writerow(
                [c.label, repr(c.T), "" if c.lhs is None else repr(c.lhs), "" if c.rhs is None else repr(c.rhs),
                 "skipped" if c.skipped else str(c.holds).lower()]
            )
        _emit(args, None, buf.getvalue())
    else:
        _emit(args, {"cases": [vars(c) for c in cases], "violations": violations, "skipped": skipped})
    print(f"pairs={len(cases)} violations={violations} skipped={skipped}", file=sys.stderr)
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_proofchain(args) -> int:
    batch = _batch(args, proof_chain=True)
    names: dict[str, dict] = {}
    for r in batch.reports:
        for c in r.proof_chain:
            row = names.setdefault(c.name, {"name": c.name, "minSlack": math.inf, "violations": 0})
            row["minSlack"] = min(row["minSlack"], c.slack)
            row["violations"] += not c.holds
    table = list(names.values())
    violations = sum(row["violations"] for row in table)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["name", "minSlack", "violations"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(table)
        _emit(args, None, buf.getvalue())
    else:
        _emit(args, {"pairs": batch.pairs, "seed": batch.seed, "inequalities": table})
    print(f"pairs={batch.pairs} violations={violations}", file=sys.stderr)
    return EXIT_VIOLATION if violations else EXIT_OK


COMMANDS = {
    "compute": cmd_compute,
    "continuity": cmd_continuity,
    "corollary": cmd_corollary,
    "fannes": cmd_fannes,
    "proofchain": cmd_proofchain,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except NotInSet as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_IN_SET
    except ConvergenceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except SamplingExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ReeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
