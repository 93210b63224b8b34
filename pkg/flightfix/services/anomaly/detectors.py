import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from flightfix.services.anomaly.geometry import point_to_leg_distance
from flightfix.services.telemetry.models import (
    FlightSample,
    MissionPlan,
    StatusText,
    TelemetryEvent,
    WaypointReached,
)


logger = logging.getLogger(__name__)

GROUND_ALT_M = 0.05
# Deviation is measured once the vehicle climbs this close to waypoint 0
ARM_ALT_TOLERANCE_M = 0.5


class ProtocolError(RuntimeError):
    pass


class AnomalyType(str, Enum):
    DEVIATION = "Deviation"
    THRUST_LOSS = "ThrustLoss"
    TIMEOUT = "Timeout"
    CRASH = "Crash"


    @property
    def label(self) -> str:
        """Human-readable name used in prompts."""
        return "Thrust Loss" if self is AnomalyType.THRUST_LOSS else self.value


class DetectorConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    deviation_threshold_m: float = Field(10.0, gt=0)
    deviation_consecutive: int = Field(10, ge=1)
    timeout_speed_mps: float = Field(1.0, gt=0)
    timeout_alt_delta_m: float = Field(0.2, gt=0)
    timeout_consecutive: int = Field(6, ge=1)
    crash_impact_speed_mps: float = Field(3.0, gt=0)
    thrust_loss_keyword: str = Field("Potential Thrust Loss", min_length=1)
    crash_keywords: List[str] = Field(default_factory=lambda: ["SIM Hit ground", "Crash"], min_length=1)
    cooldown_s: float = Field(5.0, ge=0)
    takeoff_grace_s: float = Field(5.0, ge=0)


class AnomalyEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    kind: AnomalyType
    detail: str = ""


@dataclass
class DetectorState:
    deviation_run: int = 0
    stationary_run: int = 0
    last_alt: Optional[float] = None
    active_leg: Tuple[int, int] = (0, 1)
    cooldown_until: float = 0.0
    armed: bool = False
    landing: bool = False
    start_t: Optional[float] = None
    last_sample: Optional[FlightSample] = None


    def reset_runs(self) -> None:
        self.deviation_run = 0
        self.stationary_run = 0


def advance_leg(state: DetectorState, reached: int, plan: MissionPlan) -> DetectorState:
    target = state.active_leg[1]
    if reached != target:
        raise ProtocolError(f"waypoint {reached} reached while leg {state.active_leg} is active")
    state.armed = True
    if reached >= plan.final_index:
        state.landing = True
    else:
        state.active_leg = (reached, reached + 1)
    state.deviation_run = 0
    return state


def _fire(state: DetectorState, config: DetectorConfig, t: float, kind: AnomalyType, detail: str) -> AnomalyEvent:
    state.reset_runs()
    state.cooldown_until = t + config.cooldown_s
    logger.info("Anomaly %s at t=%.1f (%s); detectors cool down until t=%.1f", kind.value, t, detail, state.cooldown_until)
    return AnomalyEvent(t=t, kind=kind, detail=detail)


def _on_sample(
    state: DetectorState, config: DetectorConfig, sample: FlightSample, plan: MissionPlan, hold: bool
) -> Optional[AnomalyEvent]:
    if state.start_t is None:
        state.start_t = sample.t
    previous_alt = state.last_alt if state.last_alt is not None else sample.alt
    state.last_alt = sample.alt
    state.last_sample = sample

    if not state.armed and sample.alt >= plan.waypoints[0][2] - ARM_ALT_TOLERANCE_M:
        state.armed = True

    if sample.t < state.cooldown_until:
        state.reset_runs()
        return None

    distance = 0.0
    if state.landing or not state.armed:
        state.deviation_run = 0
    else:
        a, b = state.active_leg
        distance = point_to_leg_distance(sample.pos, plan.waypoints[a], plan.waypoints[b])
        state.deviation_run = state.deviation_run + 1 if distance > config.deviation_threshold_m else 0

    in_grace = sample.t - state.start_t < config.takeoff_grace_s
    if state.landing or in_grace:
        state.stationary_run = 0
    else:
        stationary = (
            sample.speed < config.timeout_speed_mps
            and abs(sample.alt - previous_alt) < config.timeout_alt_delta_m
        )
        state.stationary_run = state.stationary_run + 1 if stationary else 0

    if hold:
        return None
    if state.deviation_run > config.deviation_consecutive:
        detail = f"cross-track {distance:.2f} m for {state.deviation_run} samples"
        return _fire(state, config, sample.t, AnomalyType.DEVIATION, detail)
    if state.stationary_run > config.timeout_consecutive:
        detail = f"speed {sample.speed:.2f} m/s for {state.stationary_run} samples"
        return _fire(state, config, sample.t, AnomalyType.TIMEOUT, detail)
    return None


def _on_status(
    state: DetectorState, config: DetectorConfig, status: StatusText, hold: bool
) -> Optional[AnomalyEvent]:
    if hold or status.t < state.cooldown_until:
        return None

    last = state.last_sample
    for keyword in config.crash_keywords:
        if keyword in status.text:
            if last is not None and last.speed > config.crash_impact_speed_mps:
                return _fire(state, config, status.t, AnomalyType.CRASH, f"'{keyword}' at {last.speed:.1f} m/s")
            logger.debug("Crash keyword '%s' ignored, last speed below threshold", keyword)
            break

    if config.thrust_loss_keyword in status.text:
        return _fire(state, config, status.t, AnomalyType.THRUST_LOSS, status.text)
    return None


def update(
    state: DetectorState,
    config: DetectorConfig,
    event: TelemetryEvent,
    plan: MissionPlan,
    hold: bool = False,
) -> Optional[AnomalyEvent]:
    """Feed one event to the detectors; at most one anomaly comes back.

    With hold=True rules and counters keep running but nothing fires, so a
    condition that persists fires as soon as the hold is lifted.
    """
    if isinstance(event, FlightSample):
        return _on_sample(state, config, event, plan, hold)
    if isinstance(event, StatusText):
        return _on_status(state, config, event, hold)
    if isinstance(event, WaypointReached):
        advance_leg(state, event.index, plan)
    return None


class AnomalyMonitor:
    """Detector state for one mission plus the plan it is measured against."""


    def __init__(self, config: DetectorConfig, plan: MissionPlan):
        self.config = config
        self.plan = plan
        self.state = DetectorState()


    def observe(self, event: TelemetryEvent, hold: bool = False) -> Optional[AnomalyEvent]:
        return update(self.state, self.config, event, self.plan, hold=hold)


    def cross_track(self, sample: FlightSample) -> float:
        a, b = self.state.active_leg
        return point_to_leg_distance(sample.pos, self.plan.waypoints[a], self.plan.waypoints[b])


    @property
    def last_sample(self) -> Optional[FlightSample]:
        return self.state.last_sample


    @property
    def on_ground(self) -> bool:
        last = self.state.last_sample
        return last is not None and last.alt < GROUND_ALT_M
