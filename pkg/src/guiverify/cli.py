"""Command-line entry points.

``serve`` runs the HTTP API (optionally fronting the dashboard build),
``mcp`` speaks JSON-RPC over stdio, ``setup``/``verify`` drive the
pipeline from a terminal, and ``eval`` turns label files plus run logs
into the metrics report.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .metrics import (
    REQUIREMENT_ORDINAL_CODING,
    aggregate_runs,
    compute_agreement,
    run_metrics_from_log,
)
from .report import build_metrics_report, load_labels, render_report
from .runner import RunConfig
from .service import VerificationService
from .store import StoreRoot


def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        step_cap=args.step_cap,
        parallelism=args.parallelism,
        rate_in_per_million=args.rates_in,
        rate_out_per_million=args.rates_out,
    )


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--store", required=True, help="store base directory")
    parser.add_argument("--step-cap", type=int, default=75)
    parser.add_argument("--parallelism", type=int, default=1)
    parser.add_argument("--rates-in", type=float, default=3.0, help="$ per million input tokens")
    parser.add_argument("--rates-out", type=float, default=12.0, help="$ per million output tokens")


def _service(args: argparse.Namespace) -> VerificationService:
    return VerificationService(StoreRoot(Path(args.store)), cfg=_run_config(args))


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .webapi import create_app

    app = create_app(_service(args), frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_mcp(args: argparse.Namespace) -> int:
    from .mcp import ToolServer

    ToolServer(_service(args)).serve_stdio()
    return 0


def cmd_setup(args: argparse.Namespace) -> int:
    text = Path(args.requirements_file).read_text(encoding="utf-8")
    setup = _service(args).create_setup(args.app, text)
    print(json.dumps(setup.to_dict(), indent=2))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    service = _service(args)
    requirement_ids = args.requirements.split(",") if args.requirements else [
        r.id for r in service.list_requirements(args.setup)
    ]
    runs = service.verify_and_wait(
        args.setup, requirement_ids, args.parallelism, timeout=args.timeout
    )
    for run in runs:
        state = run.summary.overall.value if run.summary else "-"
        reason = f" ({run.failure_reason.value})" if run.failure_reason else ""
        print(f"{run.run_id}: {run.requirement_id} -> {run.status.value}{reason} {state}")
    return 0 if all(r.status.value == "succeeded" for r in runs) else 1


def cmd_eval(args: argparse.Namespace) -> int:
    gold = load_labels(args.gold)
    pred = load_labels(args.pred)

    aggregates_by_app = None
    overall_aggregates = None
    if args.runs:
        rows = [run_metrics_from_log(p) for p in sorted(Path(args.runs).glob("*.jsonl"))]
        if rows:
            overall_aggregates = aggregate_runs(rows, sample_sd=args.sample_sd)
            by_setup: dict[str, list[dict]] = {}
            for row in rows:
                by_setup.setdefault(str(row.get("setup_id", "")), []).append(row)
            label_apps = {i.split("/", 1)[0] if "/" in i else "all" for i in gold.requirements}
            if set(by_setup) <= label_apps:
                aggregates_by_app = {
                    app: aggregate_runs(group, sample_sd=args.sample_sd)
                    for app, group in by_setup.items()
                }

    report = build_metrics_report(gold, pred, aggregates_by_app)
    if report.average.aggregates is None and overall_aggregates is not None:
        report.average.aggregates = overall_aggregates

    agreement = None
    shared = sorted(set(gold.requirements) & set(pred.requirements))
    shared_acs = sorted(set(gold.criteria) & set(pred.criteria))
    if shared and shared_acs:
        matrix = [
            [REQUIREMENT_ORDINAL_CODING[gold.requirements[i]] for i in shared],
            [REQUIREMENT_ORDINAL_CODING[pred.requirements[i]] for i in shared],
        ]
        try:
            agreement = compute_agreement(
                matrix,
                [gold.criteria[k] for k in shared_acs],
                [pred.criteria[k] for k in shared_acs],
                resamples=args.bootstrap,
                seed=args.seed,
            )
        except ArithmeticError as exc:
            print(f"agreement not computable: {exc}", file=sys.stderr)

    csv_text, table_text = render_report(report, agreement)
    Path(args.out).write_text(csv_text, encoding="utf-8")
    print(table_text, end="")
    print(f"\nreport written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guiverify")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP API")
    _add_run_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8777)
    p.add_argument("--frontend", default=None, help="directory with the dashboard build")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("mcp", help="JSON-RPC tool server on stdio")
    _add_run_flags(p)
    p.set_defaults(func=cmd_mcp)

    p = sub.add_parser("setup", help="create a setup from block-format requirements")
    _add_run_flags(p)
    p.add_argument("--app", required=True, help="app path or fixture:<name>")
    p.add_argument("--requirements-file", required=True)
    p.set_defaults(func=cmd_setup)

    p = sub.add_parser("verify", help="verify requirements and wait for the verdicts")
    _add_run_flags(p)
    p.add_argument("--setup", required=True)
    p.add_argument("--requirements", default="", help="comma-separated ids; default all")
    p.add_argument("--timeout", type=float, default=120.0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", help="metrics report from label files and run logs")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--runs", default=None, help="directory of run logs")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bootstrap", type=int, default=10_000)
    p.add_argument("--sample-sd", action="store_true", help="sample SD instead of population")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
