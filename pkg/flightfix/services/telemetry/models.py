import math
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


Vector3 = Tuple[float, float, float]

ALT_TOLERANCE = 1e-9
MIN_WAYPOINT_SEPARATION = 1e-6


class FlightSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["sample"] = "sample"
    t: float = Field(ge=0)
    pos: Vector3
    vel: Vector3
    alt: float
    # roll, pitch, yaw in radians; carried through, never read by the detectors
    attitude: Optional[Vector3] = None


    @model_validator(mode="after")
    def _alt_matches_pos(self) -> "FlightSample":
        if abs(self.alt - self.pos[2]) > ALT_TOLERANCE:
            raise ValueError(f"alt {self.alt} disagrees with pos.z {self.pos[2]}")
        return self


    @property
    def speed(self) -> float:
        return math.sqrt(self.vel[0] ** 2 + self.vel[1] ** 2 + self.vel[2] ** 2)


class StatusText(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["status"] = "status"
    t: float = Field(ge=0)
    text: str = Field(min_length=1)


class WaypointReached(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["waypoint_reached"] = "waypoint_reached"
    t: float = Field(ge=0)
    index: int = Field(ge=0)


class Landed(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["landed"] = "landed"
    t: float = Field(ge=0)


class MissionTimeout(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["mission_timeout"] = "mission_timeout"
    t: float = Field(ge=0)


TelemetryEvent = Annotated[
    Union[FlightSample, StatusText, WaypointReached, Landed, MissionTimeout],
    Field(discriminator="type"),
]


class MissionPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    waypoints: List[Vector3] = Field(min_length=2)
    cruise_speed: float = Field(gt=0)


    @field_validator("waypoints")
    @classmethod
    def _distinct_consecutive(cls, waypoints: List[Vector3]) -> List[Vector3]:
        for i in range(1, len(waypoints)):
            if math.dist(waypoints[i - 1], waypoints[i]) <= MIN_WAYPOINT_SEPARATION:
                raise ValueError(f"waypoints {i - 1} and {i} coincide")
        return waypoints


    @property
    def final_index(self) -> int:
        return len(self.waypoints) - 1


class FinalStatus(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["landed", "crashed", "aborted"]
    reason: Optional[str] = None


    @classmethod
    def landed(cls) -> "FinalStatus":
        return cls(kind="landed")


    @classmethod
    def crashed(cls) -> "FinalStatus":
        return cls(kind="crashed")


    @classmethod
    def aborted(cls, reason: str) -> "FinalStatus":
        return cls(kind="aborted", reason=reason)


    def __str__(self) -> str:
        if self.kind == "landed":
            return "Landed-at-destination"
        if self.kind == "crashed":
            return "Crashed"
        return f"Aborted({self.reason})"


class ParamsAck(BaseModel):
    """Acknowledgment of a parameter upload; t is the time it took effect."""

    model_config = ConfigDict(frozen=True)

    type: Literal["params_ack"] = "params_ack"
    t: float = Field(ge=0)
    params: dict[str, float] = Field(default_factory=dict)


class MissionEnd(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["mission_end"] = "mission_end"
    t: float = Field(ge=0)
    status: FinalStatus
