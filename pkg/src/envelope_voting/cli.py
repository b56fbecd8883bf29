"""Command-line entry point: ``envelope-voting {run,generate,verify,paper-example}``.

Exit status: 0 success, 1 a property violation was found, 2 invalid input.
Reports go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .exceptions import MechanismError
from .harness import GeneratorConfig, generate_scenario, load_scenario, worked_example_scenario, run_scenario
from .mechanism import settle_round
from .verification import SUITES, run_suite

EXIT_OK, EXIT_VIOLATION, EXIT_INVALID = 0, 1, 2


def _emit_reports(reports, fmt: str, out) -> None:
    if fmt == "json":
        for rep in reports:
            out.write(rep.to_json() + "\n")
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["name", "trials", "violations", "worst_margin", "passed", "seed",
                     "example_seeds", "details"])
    for rep in reports:
        writer.writerow([rep.name, rep.trials, rep.violations, repr(rep.worst_margin), rep.passed,
                         rep.seed, ";".join(map(str, rep.example_seeds)),
                         json.dumps(rep.details, sort_keys=True)])


def cmd_run(args, out) -> int:
    report = run_scenario(load_scenario(args.scenario))
    out.write(report.to_json() + "\n" if args.format == "json" else report.to_csv())
    return EXIT_OK


def cmd_generate(args, out) -> int:
    config = GeneratorConfig(n=args.n, m=args.m, omega=args.omega,
                             sybil_probability=args.sybil_probability,
                             max_envelopes=args.max_envelopes)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        scenario = generate_scenario(config, args.seed, k)
        if args.out:
            path = Path(args.out) / f"scenario_{k:05d}.json"
            path.write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
        else:
            out.write(scenario.to_json() + "\n")
    return EXIT_OK


def cmd_verify(args, out) -> int:
    reports = run_suite(args.property, args.trials, args.seed)
    _emit_reports(reports, args.format, out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VIOLATION


def worked_example_breakdown() -> dict:
    scenario = worked_example_scenario()
    outcome = settle_round([p.deposits for p in scenario.players], scenario.tie_break)
    a = outcome.scale
    parts = []
    for k, tb in enumerate(outcome.transfers):
        parts.append({
            "participant": k + 1,
            "deposits": outcome.deposits[k].tolist(),
            "votes": outcome.votes[k].tolist(),
            "r0": tb.r0.tolist(),
            "r1": tb.r1.tolist(),
            "r0_over_a": (tb.r0 / a).tolist(),
            "r1_over_a": (tb.r1 / a).tolist(),
            "t": tb.t.tolist(),
            "refund": tb.total,
            "deposited": float(outcome.deposits[k].sum()),
        })
    return {
        "selected": f"A{outcome.selected + 1}",
        "a": a,
        "tallies": outcome.tallies.tolist(),
        "participants": parts,
        "surplus": outcome.surplus,
    }


def cmd_worked_example(args, out) -> int:
    data = worked_example_breakdown()
    if args.format == "json":
        out.write(json.dumps(data, indent=2) + "\n")
        return EXIT_OK
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["participant", "selected", "a", "votes", "r0_over_a", "r1_over_a",
                     "refund", "deposited", "surplus"])
    for part in data["participants"]:
        writer.writerow([part["participant"], data["selected"], repr(data["a"]),
                         ";".join(map(repr, part["votes"])),
                         ";".join(map(repr, part["r0_over_a"])),
                         ";".join(map(repr, part["r1_over_a"])),
                         repr(part["refund"]), repr(part["deposited"]), repr(data["surplus"])])
    out.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(prog="envelope-voting", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[fmt], help="settle one scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("generate", parents=[fmt], help="emit random scenarios")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--omega", type=float, default=100.0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sybil-probability", type=float, default=0.0)
    p.add_argument("--max-envelopes", type=int, default=3)
    p.add_argument("--out", help="directory for one JSON file per scenario (default: JSON lines on stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", parents=[fmt], help="run randomised property suites")
    p.add_argument("--property", choices=(*SUITES, "all"), default="all")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("paper-example", parents=[fmt], help="print the two-envelope worked example")
    p.set_defaults(func=cmd_worked_example)
    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if getattr(args, "trials", 1) < 1:
        print("error: --trials must be positive", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args, out)
    except (MechanismError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
