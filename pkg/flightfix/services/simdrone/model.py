import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from flightfix.services.simdrone.faults import DEFAULT_FAULT_TABLE, FaultClass, FaultEntry, FaultModel
from flightfix.services.telemetry.models import (
    FinalStatus,
    FlightSample,
    Landed,
    MissionPlan,
    MissionTimeout,
    StatusText,
    TelemetryEvent,
    WaypointReached,
)


logger = logging.getLogger(__name__)

TAKEOFF_CLIMB_MPS = 2.5
LANDING_DESCENT_MPS = 0.8
WAYPOINT_RADIUS_M = 1.0
AIRBORNE_ALT_M = 0.05
TOUCHDOWN_MAX_MPS = 1.0

OSC_GAIN_M = 11.0
OSC_PERIOD_S = 8.0
OSC_RELAX_S = 2.0
OSC_MAX_SLEW_MPS = 15.0
PHASE_SPREAD = 0.618034

THRUST_WARNING_PERIOD_S = 1.0
TIMEOUT_CRAWL_MPS = 0.5

PLUNGE_DELAY_S = 2.0
PLUNGE_PERIOD_S = 3.0
PLUNGE_DURATION_S = 0.5
PLUNGE_SINK_MPS = 4.0
PLUNGE_RECOVERY_MPS = 1.0
PLUNGE_ALT_LOSS_M = 0.5

_EPS = 1e-9

StepHook = Callable[[float, Dict[str, float]], None]


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = 0
    sample_rate_hz: float = Field(10.0, gt=0)
    dt: float = Field(0.1, gt=0)
    mission_timeout: float = Field(600.0, gt=0)
    realtime: bool = False
    fault_table: Dict[str, FaultEntry] = Field(default_factory=lambda: dict(DEFAULT_FAULT_TABLE))


    @model_validator(mode="after")
    def _dt_matches_rate(self) -> "SimConfig":
        if abs(self.dt * self.sample_rate_hz - 1.0) > 1e-12:
            raise ValueError(f"dt {self.dt} does not match sample_rate_hz {self.sample_rate_hz}")
        return self


@dataclass
class SimState:
    pos: np.ndarray
    vel: np.ndarray
    ref: np.ndarray
    offset: np.ndarray
    params: Dict[str, float]
    osc_phase: float
    osc_amp: float
    t: float = 0.0
    step_index: int = 0
    phase: str = "takeoff"  # takeoff | cruise | landing
    path_leg: int = 0
    target_wp: int = 1
    descended: float = 0.0
    drop: float = 0.0
    floor: float = 0.0
    plunge_left: float = 0.0
    next_plunge_t: Optional[float] = None
    next_warning_t: Optional[float] = None
    pending: Optional[Dict[str, float]] = None
    airborne: bool = False
    landed: bool = False
    crashed: bool = False
    timed_out: bool = False


def _horizontal_normal(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dx, dy = b[0] - a[0], b[1] - a[1]
    length = math.hypot(dx, dy)
    if length < _EPS:
        return np.array([0.0, 1.0, 0.0])
    return np.array([-dy / length, dx / length, 0.0])


class Simulator:
    """Kinematic multicopter whose misbehavior is driven by the fault table.

    The vehicle follows a guidance reference that climbs vertically over
    waypoint 0, runs the polyline at the commanded speed and descends after the
    final waypoint. Fault classes superpose on that reference: a lateral
    oscillation, halved climb authority with thrust warnings, a forward-speed
    collapse, and periodic altitude plunges.
    """


    def __init__(
        self,
        config: SimConfig,
        plan: MissionPlan,
        params: Mapping[str, float],
        fault_model: FaultModel,
        on_step: Optional[StepHook] = None,
    ):
        self.config = config
        self.plan = plan
        self.fault_model = fault_model
        self.on_step = on_step
        self._waypoints = np.asarray(plan.waypoints, dtype=float)
        self._severities = fault_model.severities(params)

        launch = self._waypoints[0].copy()
        launch[2] = 0.0
        zero = np.zeros(3)
        self.state = SimState(
            pos=launch.copy(),
            vel=zero.copy(),
            ref=launch.copy(),
            offset=zero.copy(),
            params=dict(params),
            osc_phase=2.0 * math.pi * math.modf(config.seed * PHASE_SPREAD)[0],
            osc_amp=OSC_GAIN_M * self._severities[FaultClass.DEVIATION],
        )


    @property
    def finished(self) -> bool:
        s = self.state
        return s.landed or s.crashed or s.timed_out


    @property
    def final_status(self) -> Optional[FinalStatus]:
        if self.state.landed:
            return FinalStatus.landed()
        if self.state.crashed:
            return FinalStatus.crashed()
        if self.state.timed_out:
            return FinalStatus.aborted("timeout")
        return None


    @property
    def severities(self) -> Dict[FaultClass, float]:
        return dict(self._severities)


    def apply_params(self, new: Mapping[str, float]) -> float:
        """Stage new values for the next step boundary; returns the time they were accepted."""
        s = self.state
        if self.finished:
            logger.debug("Parameter update after mission end ignored")
            return s.t
        base = s.pending if s.pending is not None else s.params
        s.pending = {**base, **new}
        return s.t


    def step(self) -> List[TelemetryEvent]:
        s = self.state
        if self.finished:
            return []

        if s.pending is not None:
            s.params, s.pending = s.pending, None
            self._severities = self.fault_model.severities(s.params)
            logger.debug("t=%.1f params applied, severities %s", s.t, self._severities)

        dt = self.config.dt
        s.step_index += 1
        s.t = round(s.step_index * dt, 9)
        if self.on_step is not None:
            self.on_step(s.t, dict(s.params))

        reached: List[TelemetryEvent] = []
        notices: List[TelemetryEvent] = []
        self._advance_reference(dt, reached)
        self._advance_oscillation(dt)
        self._advance_plunges(dt, notices)

        new_pos = s.ref + s.offset
        new_pos[2] -= s.drop + s.descended
        touchdown = s.airborne and new_pos[2] <= 0.0
        if touchdown:
            new_pos[2] = 0.0
        vel = (new_pos - s.pos) / dt
        s.pos, s.vel = new_pos, vel
        if not s.airborne and new_pos[2] > AIRBORNE_ALT_M:
            s.airborne = True

        events: List[TelemetryEvent] = [
            FlightSample(
                t=s.t,
                pos=(float(new_pos[0]), float(new_pos[1]), float(new_pos[2])),
                vel=(float(vel[0]), float(vel[1]), float(vel[2])),
                alt=float(new_pos[2]),
            )
        ]
        events.extend(reached)
        self._thrust_warning(notices)
        events.extend(notices)

        if touchdown:
            events.extend(self._touchdown(vel))
        if not self.finished and s.t > self.config.mission_timeout:
            s.timed_out = True
            logger.info("Mission timeout at t=%.1f", s.t)
            events.append(MissionTimeout(t=s.t))
        return events


    def run(self, max_steps: Optional[int] = None) -> List[TelemetryEvent]:
        """Steps until the mission ends; for tests and offline traces."""
        events: List[TelemetryEvent] = []
        steps = 0
        while not self.finished and (max_steps is None or steps < max_steps):
            events.extend(self.step())
            steps += 1
        return events


    def _forward_speed(self) -> float:
        timeout = self._severities[FaultClass.TIMEOUT]
        if timeout >= 1.0:
            return TIMEOUT_CRAWL_MPS
        return self.plan.cruise_speed * (1.0 - 0.5 * timeout)


    def _advance_reference(self, dt: float, reached: List[TelemetryEvent]) -> None:
        s = self.state
        wps = self._waypoints

        if s.phase == "takeoff":
            rate = TAKEOFF_CLIMB_MPS
            if self._severities[FaultClass.THRUST] >= 1.0:
                rate *= 0.5
            s.ref[2] = min(s.ref[2] + rate * dt, wps[0][2])
            if s.ref[2] >= wps[0][2]:
                s.ref = wps[0].copy()
                s.phase = "cruise"
                s.next_plunge_t = s.t + PLUNGE_DELAY_S
                logger.debug("Takeoff complete at t=%.1f", s.t)
            return

        remaining = self._forward_speed() * dt
        final = self.plan.final_index
        while remaining > 0.0 and s.path_leg < final:
            end = wps[s.path_leg + 1]
            gap = float(np.linalg.norm(end - s.ref))
            if gap <= remaining:
                s.ref = end.copy()
                remaining -= gap
                s.path_leg += 1
            else:
                s.ref = s.ref + (end - s.ref) * (remaining / gap)
                remaining = 0.0

        if s.phase == "landing":
            s.descended = min(s.descended + LANDING_DESCENT_MPS * dt, float(s.ref[2]))
            return

        while s.target_wp <= final and np.linalg.norm(wps[s.target_wp] - s.ref) <= WAYPOINT_RADIUS_M:
            reached.append(WaypointReached(t=s.t, index=s.target_wp))
            if s.target_wp == final:
                s.phase = "landing"
                break
            s.target_wp += 1


    def _advance_oscillation(self, dt: float) -> None:
        s = self.state
        goal = OSC_GAIN_M * self._severities[FaultClass.DEVIATION]
        s.osc_amp = goal + (s.osc_amp - goal) * math.exp(-dt / OSC_RELAX_S)
        s.osc_phase = math.fmod(s.osc_phase + 2.0 * math.pi * dt / OSC_PERIOD_S, 2.0 * math.pi)

        wps = self._waypoints
        leg = min(s.path_leg, self.plan.final_index - 1)
        normal = _horizontal_normal(wps[leg], wps[leg + 1])
        wanted = normal * (s.osc_amp * math.sin(s.osc_phase))
        delta = wanted - s.offset
        size = float(np.linalg.norm(delta))
        limit = OSC_MAX_SLEW_MPS * dt
        if size > limit:
            delta *= limit / size
        s.offset = s.offset + delta


    def _advance_plunges(self, dt: float, notices: List[TelemetryEvent]) -> None:
        s = self.state
        crash = self._severities[FaultClass.CRASH]
        if crash < 2.0:
            s.floor = 0.0

        if s.next_plunge_t is not None and s.t >= s.next_plunge_t - _EPS:
            s.next_plunge_t += PLUNGE_PERIOD_S
            if crash >= 1.0:
                s.plunge_left = PLUNGE_DURATION_S
                if crash >= 2.0:
                    s.floor += PLUNGE_ALT_LOSS_M
                notices.append(StatusText(t=s.t, text=f"Crash check: uncontrolled descent {PLUNGE_SINK_MPS:.1f} m/s"))

        if s.plunge_left > _EPS:
            s.drop += PLUNGE_SINK_MPS * dt
            s.plunge_left -= dt
        elif s.drop > s.floor:
            s.drop = max(s.floor, s.drop - PLUNGE_RECOVERY_MPS * dt)


    def _thrust_warning(self, notices: List[TelemetryEvent]) -> None:
        s = self.state
        if self._severities[FaultClass.THRUST] < 1.0 or not s.airborne:
            s.next_warning_t = None
            return
        if s.next_warning_t is None or s.t >= s.next_warning_t - _EPS:
            notices.append(StatusText(t=s.t, text="Potential Thrust Loss: motors saturated"))
            s.next_warning_t = s.t + THRUST_WARNING_PERIOD_S


    def _touchdown(self, vel: np.ndarray) -> List[TelemetryEvent]:
        s = self.state
        descent = -float(vel[2])
        impact = float(np.linalg.norm(vel))
        if descent > TOUCHDOWN_MAX_MPS:
            s.crashed = True
            logger.info("Ground impact at t=%.1f, %.1f m/s", s.t, impact)
            return [StatusText(t=s.t, text=f"SIM Hit ground at {impact:.1f} m/s")]
        if s.phase == "landing":
            s.landed = True
            logger.info("Landed at t=%.1f", s.t)
            return [Landed(t=s.t)]
        return []
