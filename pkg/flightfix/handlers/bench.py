import asyncio
import logging
from typing import List, Tuple

from flightfix.config import DEFAULT_SUITE_PATH
from flightfix.handlers.common import (
    EXIT_OK,
    INPUT_ERRORS,
    Context,
    fail,
    load_context,
    log_to_run_dir,
    new_run_dir,
    write_manifest,
)
from flightfix.loader import build_advisor, build_link_factory
from flightfix.services.api.advisor import Advisor
from flightfix.services.bench.export import export_report, write_jsonl
from flightfix.services.bench.metrics import BenchReport, summarize
from flightfix.services.bench.runner import run_suite
from flightfix.services.bench.suite import Suite, load_suite
from flightfix.services.repair import RepairRecord


logger = logging.getLogger(__name__)


def add_parser(subparsers, parents) -> None:
    parser = subparsers.add_parser("bench", parents=parents, help="run a benchmark suite and report RSR/ANR")
    parser.add_argument("--suite", default=str(DEFAULT_SUITE_PATH), help="suite JSONL file (default: shipped suite)")
    parser.add_argument("--parallelism", type=int, default=1, help="missions in flight at once")
    parser.set_defaults(handler=handle)


async def bench(ctx: Context, advisor: Advisor, suite: Suite, parallelism: int) -> Tuple[BenchReport, List[RepairRecord]]:
    link_factory = build_link_factory(ctx.config, ctx.registry, ctx.fault_model, ctx.config_path)
    async with advisor:
        return await run_suite(
            suite,
            link_factory,
            advisor,
            ctx.registry,
            ctx.config.detector,
            ctx.config.orchestrator,
            parallelism=parallelism,
            fault_model=ctx.fault_model,
            label=ctx.config.advisor.label,
        )


def print_report(report: BenchReport) -> None:
    print(f"advisor {report.label}: {report.ttc} cases, {report.passed} passed, {report.failed} failed")
    print(f"NRC {report.nrc}  TRA {report.tra}  RSR {report.rsr.display}  ANR {report.anr.display}")
    for row in report.histogram:
        print(f"  {row.repair_count} repairs: {row.passed} passed, {row.failed} failed")
    for row in summarize(report):
        print(f"  {row.fault_class:<10} {row.cases:>4} cases  {row.passed:>4} passed  NRC {row.nrc:>4}  TRA {row.tra:>4}")
    if report.tokens:
        print(f"advisor tokens: {report.tokens}")


def handle(args) -> int:
    if args.parallelism < 1:
        return fail(ValueError("--parallelism must be at least 1"))
    try:
        ctx = load_context(args)
        suite = load_suite(args.suite, ctx.registry)
        advisor = build_advisor(ctx.config, ctx.registry, ctx.fault_model)
        run_dir = new_run_dir(ctx.config.output_dir)
    except INPUT_ERRORS as e:
        return fail(e)

    log_to_run_dir(ctx, run_dir)
    write_manifest(run_dir, "bench", ctx.config, {"suite": args.suite, "parallelism": args.parallelism, "cases": len(suite.cases)})
    report, records = asyncio.run(bench(ctx, advisor, suite, args.parallelism))

    export_report(report, "json", run_dir / "report.json")
    export_report(report, "csv", run_dir / "report.csv")
    ordered = sorted(records, key=lambda r: r.case_id or "")
    write_jsonl((r.model_dump(mode="json") for r in ordered), run_dir / "records.jsonl")

    print_report(report)
    print(f"outputs: {run_dir}")
    return EXIT_OK
