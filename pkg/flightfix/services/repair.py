import asyncio
import logging
from typing import Callable, Dict, List, Literal, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from flightfix.services.anomaly.detectors import AnomalyEvent, AnomalyMonitor, AnomalyType, DetectorConfig, ProtocolError
from flightfix.services.api.advisor import Advisor, AuditEntry
from flightfix.services.api.parser import RepairAdvice
from flightfix.services.paramdb import ParamSet, ParamValidationError, format_value
from flightfix.services.telemetry.link import MissionHandle, StaleHandle, VehicleLink
from flightfix.services.telemetry.models import FinalStatus, FlightSample, MissionPlan, TelemetryEvent
from flightfix.services.telemetry.wire import WireError


logger = logging.getLogger(__name__)

FailureReason = Literal["repair-limit", "timeout", "crash", "infra", "protocol"]
EventHook = Callable[[TelemetryEvent], None]


class OrchestratorConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    repair_limit: int = Field(5, ge=1)
    mission_timeout: float = Field(600.0, gt=0)
    # virtual seconds of telemetry that flow between a detection and its upload
    advisor_latency: float = Field(0.0, ge=0)


class MissionResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    outcome: Literal["passed", "failed"]
    reason: Optional[FailureReason] = None


    @classmethod
    def passed(cls) -> "MissionResult":
        return cls(outcome="passed")


    @classmethod
    def failed(cls, reason: FailureReason) -> "MissionResult":
        return cls(outcome="failed", reason=reason)


    @property
    def is_passed(self) -> bool:
        return self.outcome == "passed"


    def __str__(self) -> str:
        return "Passed" if self.is_passed else f"Failed({self.reason})"


class Marker(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    kind: Literal["anomaly", "upload"]
    detail: str = ""


class TracePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    x: float
    y: float
    z: float
    cross_track: float


class RepairRecord(BaseModel):
    case_id: Optional[str] = None
    p_initial: Dict[str, float]
    result: MissionResult
    anomaly_record: List[AnomalyType] = Field(default_factory=list)
    repair_count: int = 0
    advice_log: List[RepairAdvice] = Field(default_factory=list)
    final_params: Dict[str, float] = Field(default_factory=dict)
    final_status: Optional[FinalStatus] = None
    terminal_anomaly: Optional[AnomalyEvent] = None
    markers: List[Marker] = Field(default_factory=list)
    audit: List[AuditEntry] = Field(default_factory=list, exclude=True)
    trace: List[TracePoint] = Field(default_factory=list, exclude=True)


def merge(current: Mapping[str, float], updates: Mapping[str, float]) -> ParamSet:
    return {**current, **updates}


def _result_from_status(status: Optional[FinalStatus]) -> MissionResult:
    if status is None:
        return MissionResult.failed("infra")
    if status.kind == "landed":
        return MissionResult.passed()
    if status.kind == "crashed":
        return MissionResult.failed("crash")
    if status.reason == "timeout":
        return MissionResult.failed("timeout")
    return MissionResult.failed("infra")


class RepairSession:
    """Monitor -> detect -> advise -> upload loop for one running mission."""


    def __init__(
        self,
        link: VehicleLink,
        handle: MissionHandle,
        advisor: Advisor,
        monitor: AnomalyMonitor,
        config: OrchestratorConfig,
        p_initial: Mapping[str, float],
        on_event: Optional[EventHook] = None,
    ):
        self.link = link
        self.handle = handle
        self.advisor = advisor
        self.monitor = monitor
        self.config = config
        self.on_event = on_event
        self.p_current: ParamSet = dict(p_initial)
        self.anomaly_record: List[AnomalyType] = []
        self.advice_log: List[RepairAdvice] = []
        self.audit: List[AuditEntry] = []
        self.markers: List[Marker] = []
        self.trace: List[TracePoint] = []
        self.terminal_anomaly: Optional[AnomalyEvent] = None
        self._pending: Optional[asyncio.Task] = None


    @property
    def repair_count(self) -> int:
        return len(self.anomaly_record)


    async def run(self) -> Optional[MissionResult]:
        """Returns a verdict when the loop decides one, None when the vehicle's final status decides."""
        try:
            return await self._loop()
        except ProtocolError as e:
            logger.error("Telemetry protocol violation: %s", e)
            return MissionResult.failed("protocol")
        except (WireError, ConnectionError, StaleHandle, ParamValidationError) as e:
            logger.error("Mission infrastructure failure: %s", e)
            return MissionResult.failed("infra")
        finally:
            if self._pending is not None:
                self._pending.cancel()


    async def _loop(self) -> Optional[MissionResult]:
        while self.handle.active:
            event = await self._next()
            if event is None:
                return None
            if event.t > self.config.mission_timeout:
                logger.info("Mission exceeded %.0fs at t=%.1f", self.config.mission_timeout, event.t)
                return MissionResult.failed("timeout")

            anomaly = self._observe(event)
            if anomaly is None:
                continue
            if anomaly.kind is AnomalyType.CRASH and self.monitor.on_ground:
                logger.info("Crash on the ground at t=%.1f, mission over", anomaly.t)
                self.terminal_anomaly = anomaly
                return MissionResult.failed("crash")
            if self.repair_count >= self.config.repair_limit:
                logger.info("Repair limit %d reached, %s at t=%.1f left unserviced", self.config.repair_limit, anomaly.kind.value, anomaly.t)
                return MissionResult.failed("repair-limit")

            verdict = await self._repair(anomaly)
            if verdict is not None:
                return verdict
        return None


    async def _next(self) -> Optional[TelemetryEvent]:
        if self._pending is not None:
            task, self._pending = self._pending, None
            return await task
        return await self.handle.next_event()


    def _observe(self, event: TelemetryEvent, hold: bool = False) -> Optional[AnomalyEvent]:
        if self.on_event is not None:
            self.on_event(event)
        anomaly = self.monitor.observe(event, hold=hold)
        if isinstance(event, FlightSample):
            x, y, z = event.pos
            self.trace.append(TracePoint(t=event.t, x=x, y=y, z=z, cross_track=self.monitor.cross_track(event)))
        if anomaly is not None:
            self.markers.append(Marker(t=anomaly.t, kind="anomaly", detail=anomaly.kind.value))
        return anomaly


    async def _repair(self, anomaly: AnomalyEvent) -> Optional[MissionResult]:
        attempt = self.repair_count + 1
        logger.info("Repair attempt %d/%d for %s at t=%.1f", attempt, self.config.repair_limit, anomaly.kind.value, anomaly.t)
        if self.handle.realtime:
            advice, audit, verdict = await self._advise_concurrently(anomaly)
        else:
            advice, audit, verdict = await self._advise_then_drain(anomaly)

        self.anomaly_record.append(anomaly.kind)
        self.advice_log.append(advice)
        self.audit.append(audit)
        if verdict is not None:
            return verdict
        if not self.handle.active:
            logger.info("Mission ended before the fix could be uploaded")
            return None
        if advice.is_empty:
            return None

        ack = await self.link.upload_params(self.handle, advice.updates)
        self.p_current = merge(self.p_current, advice.updates)
        detail = ", ".join(f"{name}={format_value(value)}" for name, value in sorted(advice.updates.items()))
        self.markers.append(Marker(t=ack.t, kind="upload", detail=detail))
        logger.info("Uploaded fix at t=%.1f: %s", ack.t, detail)
        return None


    async def _advise_then_drain(self, anomaly: AnomalyEvent) -> Tuple[RepairAdvice, AuditEntry, Optional[MissionResult]]:
        # vehicle time stands still while the advisor is awaited
        advice, audit = await self.advisor.get_fix(anomaly.kind, self.p_current)
        deadline = anomaly.t + self.config.advisor_latency
        while self.config.advisor_latency > 0 and self.handle.active and self.handle.last_t < deadline:
            event = await self._next()
            if event is None:
                break
            if event.t > self.config.mission_timeout:
                return advice, audit, MissionResult.failed("timeout")
            self._observe(event, hold=True)
        return advice, audit, None


    async def _advise_concurrently(self, anomaly: AnomalyEvent) -> Tuple[RepairAdvice, AuditEntry, Optional[MissionResult]]:
        fix = asyncio.create_task(self.advisor.get_fix(anomaly.kind, self.p_current))
        verdict: Optional[MissionResult] = None
        stream_open = True
        while stream_open and not fix.done():
            if self._pending is None:
                self._pending = asyncio.create_task(self.handle.next_event())
            done, _ = await asyncio.wait({fix, self._pending}, return_when=asyncio.FIRST_COMPLETED)
            if self._pending not in done:
                continue
            event = self._pending.result()
            self._pending = None
            if event is None:
                stream_open = False
            elif event.t > self.config.mission_timeout:
                verdict = MissionResult.failed("timeout")
                stream_open = False
            else:
                self._observe(event, hold=True)
        advice, audit = await fix
        return advice, audit, verdict


async def run_mission(
    link: VehicleLink,
    p_initial: Mapping[str, float],
    plan: MissionPlan,
    advisor: Advisor,
    detectors: DetectorConfig,
    config: OrchestratorConfig,
    case_id: Optional[str] = None,
    on_event: Optional[EventHook] = None,
) -> RepairRecord:
    handle = await link.start_mission(p_initial, plan)
    logger.info("Mission %s started", case_id or "")
    session = RepairSession(link, handle, advisor, AnomalyMonitor(detectors, plan), config, p_initial, on_event)

    verdict: Optional[MissionResult] = None
    final_status: Optional[FinalStatus] = None
    try:
        verdict = await session.run()
    finally:
        try:
            final_status = await link.stop_mission(handle)
        except (ConnectionError, OSError, WireError) as e:
            logger.error("Stopping the mission failed: %s", e)

    result = verdict or _result_from_status(final_status)
    logger.info("Mission %s: %s after %d repairs (%s)", case_id or "", result, session.repair_count, final_status)
    return RepairRecord(
        case_id=case_id,
        p_initial=dict(p_initial),
        result=result,
        anomaly_record=list(session.anomaly_record),
        repair_count=session.repair_count,
        advice_log=list(session.advice_log),
        final_params=dict(session.p_current),
        final_status=final_status,
        terminal_anomaly=session.terminal_anomaly,
        markers=list(session.markers),
        audit=list(session.audit),
        trace=list(session.trace),
    )
