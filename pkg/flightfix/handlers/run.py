import asyncio
import logging
from pathlib import Path
from typing import List, Tuple

from flightfix.handlers.common import (
    EXIT_FAILED,
    EXIT_OK,
    INPUT_ERRORS,
    Context,
    fail,
    load_context,
    load_params_file,
    load_plan,
    log_to_run_dir,
    new_run_dir,
    write_manifest,
)
from flightfix.loader import build_advisor, build_link_factory
from flightfix.services.api.advisor import Advisor
from flightfix.services.bench.export import export_trace, write_audit, write_record, write_telemetry
from flightfix.services.repair import RepairRecord, run_mission
from flightfix.services.telemetry.models import MissionPlan, TelemetryEvent


logger = logging.getLogger(__name__)


def add_parser(subparsers, parents) -> None:
    parser = subparsers.add_parser("run", parents=parents, help="fly one mission under the monitor-and-repair loop")
    parser.add_argument("--params", help="JSON object of parameter overrides (others keep defaults)")
    parser.add_argument("--plan", help="shipped plan name (square, survey) or a plan JSON file")
    parser.set_defaults(handler=handle)


async def fly(ctx: Context, advisor: Advisor, params: dict, plan: MissionPlan) -> Tuple[RepairRecord, List[TelemetryEvent]]:
    p_initial = {**ctx.registry.defaults(), **params}
    events: List[TelemetryEvent] = []
    link_factory = build_link_factory(ctx.config, ctx.registry, ctx.fault_model, ctx.config_path)
    async with advisor:
        async with link_factory() as link:
            record = await run_mission(
                link,
                p_initial,
                plan,
                advisor,
                ctx.config.detector,
                ctx.config.orchestrator,
                case_id="run",
                on_event=events.append,
            )
    return record, events


def write_outputs(run_dir: Path, plan: MissionPlan, record: RepairRecord, events: List[TelemetryEvent]) -> None:
    write_record(record, run_dir / "record.json")
    write_audit(record, run_dir / "audit.jsonl")
    write_telemetry(plan, events, run_dir / "telemetry.jsonl")
    export_trace(record, run_dir / "trace.csv")


def handle(args) -> int:
    try:
        ctx = load_context(args)
        params = load_params_file(args.params, ctx.registry) if args.params else {}
        plan = load_plan(args.plan)
        advisor = build_advisor(ctx.config, ctx.registry, ctx.fault_model)
        run_dir = new_run_dir(ctx.config.output_dir)
    except INPUT_ERRORS as e:
        return fail(e)

    log_to_run_dir(ctx, run_dir)
    write_manifest(run_dir, "run", ctx.config, {"params_file": args.params, "plan": plan.model_dump(mode="json")})
    try:
        record, events = asyncio.run(fly(ctx, advisor, params, plan))
    except INPUT_ERRORS as e:
        # the mission never started
        return fail(e)

    write_outputs(run_dir, plan, record, events)
    print(f"{record.result} after {record.repair_count} repair(s), final status {record.final_status}")
    print(f"outputs: {run_dir}")
    return EXIT_OK if record.result.is_passed else EXIT_FAILED
