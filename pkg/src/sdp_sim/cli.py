"""Command line entry point: ``sdp-sim run|demo|validate``.

Exit codes: 0 success, 1 usage, 2 scenario validation, 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import run_demo, run_figure
from .scenario import FIGURES, ScenarioError, Sweep, bundled_scenarios, load_scenario

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdp-sim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="regenerate one figure's data as CSV")
    run.add_argument("scenario", help=f"scenario file or bundled name ({', '.join(bundled_scenarios())})")
    run.add_argument("--figure", required=True, choices=FIGURES)
    run.add_argument("--theta-ms", type=float, help="latency per domain (or per path, see --latency-scope)")
    run.add_argument("--domains", type=int, help="domain count for fig4/6/7")
    run.add_argument("--delay-start-ms", type=float)
    run.add_argument("--delay-stop-ms", type=float)
    run.add_argument("--delay-step-ms", type=float)
    run.add_argument("--delay-ms", type=float, help="fixed end-to-end delay for fig8")
    run.add_argument("--max-domains", type=int, help="largest domain count for fig8")
    run.add_argument("--latency-scope", choices=("domain", "path"))
    run.add_argument("--flows", help="comma separated flow names")
    run.add_argument("--out", type=Path, help="CSV destination (default stdout)")
    run.add_argument("--meta", type=Path, help="write table metadata as JSON here")

    demo = sub.add_parser("demo", help="walk the scenario's demands through the broker")
    demo.add_argument("scenario")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("scenario")
    return p


def _overrides(args, scenario) -> dict:
    exp = scenario.experiment(args.figure)
    ov = {
        "theta_ms": args.theta_ms,
        "domains": args.domains,
        "fixed_delay_ms": args.delay_ms,
        "latency_scope": args.latency_scope,
    }
    if args.flows:
        ov["flows"] = [f.strip() for f in args.flows.split(",") if f.strip()]
    if any(x is not None for x in (args.delay_start_ms, args.delay_stop_ms, args.delay_step_ms)):
        sw = exp.delay_ms
        ov["delay_ms"] = Sweep(
            args.delay_start_ms if args.delay_start_ms is not None else sw.start,
            args.delay_stop_ms if args.delay_stop_ms is not None else sw.stop,
            args.delay_step_ms if args.delay_step_ms is not None else sw.step,
        )
    if args.max_domains is not None:
        ov["domain_range"] = (exp.domain_range[0], args.max_domains)
    return ov


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.command == "validate":
        print(
            f"ok: {scenario.name or args.scenario}: {len(scenario.matrices)} domains, "
            f"{len(scenario.flows)} flows, {len(scenario.demands)} demands"
        )
        return EXIT_OK

    if args.command == "demo":
        for event in run_demo(scenario):
            print(event)
        return EXIT_OK

    try:
        table = run_figure(scenario, args.figure, _overrides(args, scenario))
    except ScenarioError as exc:
        print(f"invalid experiment: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = table.to_csv()
    try:
        if args.out:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
        if args.meta:
            args.meta.write_text(json.dumps(table.metadata, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
