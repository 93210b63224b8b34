import asyncio
import logging
from typing import Callable, List, Optional, Tuple

from flightfix.services.anomaly.detectors import DetectorConfig
from flightfix.services.api.advisor import Advisor
from flightfix.services.bench.metrics import BenchReport, CaseSummary, aggregate
from flightfix.services.bench.suite import BenchCase, Suite
from flightfix.services.paramdb import ParamRegistry
from flightfix.services.repair import MissionResult, OrchestratorConfig, RepairRecord, run_mission
from flightfix.services.simdrone.faults import FaultModel
from flightfix.services.telemetry.link import VehicleLink


logger = logging.getLogger(__name__)

LinkFactory = Callable[[], VehicleLink]
RecordHook = Callable[[RepairRecord], None]


def initial_params(case: BenchCase, registry: ParamRegistry) -> dict:
    return {**registry.defaults(), **case.overrides}


def summarize_record(record: RepairRecord, fault_model: Optional[FaultModel] = None) -> CaseSummary:
    fault_classes: List[str] = []
    if fault_model is not None:
        fault_classes = sorted({risk.fault_class.value for risk in fault_model.risks(record.p_initial)})
    tokens = 0
    for entry in record.audit:
        tokens += entry.usage.get("total_tokens", entry.usage.get("prompt_tokens", 0) + entry.usage.get("completion_tokens", 0))
    return CaseSummary(
        case_id=record.case_id or "",
        result=str(record.result),
        passed=record.result.is_passed,
        repair_count=record.repair_count,
        anomalies=[kind.value for kind in record.anomaly_record],
        fault_classes=fault_classes,
        tokens=tokens,
    )


async def run_case(
    case: BenchCase,
    suite: Suite,
    link: VehicleLink,
    advisor: Advisor,
    registry: ParamRegistry,
    detectors: DetectorConfig,
    orchestrator: OrchestratorConfig,
) -> RepairRecord:
    p_initial = initial_params(case, registry)
    try:
        return await run_mission(
            link, p_initial, suite.plan_for(case), advisor, detectors, orchestrator, case_id=case.case_id
        )
    except Exception as e:
        # one broken case never aborts the suite
        logger.error("Case %s failed to run: %s: %s", case.case_id, type(e).__name__, e)
        return RepairRecord(case_id=case.case_id, p_initial=p_initial, result=MissionResult.failed("infra"), final_params=p_initial)


async def run_suite(
    suite: Suite,
    link_factory: LinkFactory,
    advisor: Advisor,
    registry: ParamRegistry,
    detectors: DetectorConfig,
    orchestrator: OrchestratorConfig,
    parallelism: int = 1,
    fault_model: Optional[FaultModel] = None,
    label: str = "",
    on_record: Optional[RecordHook] = None,
) -> Tuple[BenchReport, List[RepairRecord]]:
    """Run every case with its own link, at most `parallelism` at a time.

    The report does not depend on completion order.
    """
    semaphore = asyncio.Semaphore(max(1, parallelism))
    done = 0

    async def run_single(case: BenchCase) -> RepairRecord:
        nonlocal done
        async with semaphore:
            async with link_factory() as link:
                record = await run_case(case, suite, link, advisor, registry, detectors, orchestrator)
        done += 1
        logger.info("[%d/%d] %s: %s (%d repairs)", done, len(suite.cases), case.case_id, record.result, record.repair_count)
        if on_record is not None:
            on_record(record)
        return record

    records = await asyncio.gather(*(run_single(case) for case in suite.cases))
    report = aggregate((summarize_record(r, fault_model) for r in records), label=label)
    logger.info("Suite finished: RSR %s, ANR %s over %d cases", report.rsr.display, report.anr.display, report.ttc)
    return report, list(records)
