import logging
from abc import ABC, abstractmethod
from typing import Mapping, Optional

from flightfix.services.paramdb import ParamRegistry
from flightfix.services.telemetry.models import (
    FinalStatus,
    Landed,
    MissionPlan,
    MissionTimeout,
    ParamsAck,
    TelemetryEvent,
)


logger = logging.getLogger(__name__)


class StaleHandle(RuntimeError):
    pass


class MissionHandle(ABC):
    """Single-consumer view of one running mission's ordered event stream."""

    # True when vehicle time keeps advancing while the consumer is busy.
    realtime: bool = False


    def __init__(self, plan: MissionPlan):
        self.plan = plan
        self.last_t = 0.0
        self.final_status: Optional[FinalStatus] = None


    @property
    def active(self) -> bool:
        return self.final_status is None


    @abstractmethod
    async def _receive(self) -> Optional[TelemetryEvent]:
        """Next raw event, or None once the vehicle closed the stream."""


    async def next_event(self) -> Optional[TelemetryEvent]:
        if self.final_status is not None:
            return None
        event = await self._receive()
        if event is None:
            if self.final_status is None:
                self.final_status = FinalStatus.aborted("link closed")
            return None

        self.last_t = max(self.last_t, event.t)
        if isinstance(event, Landed):
            self.final_status = FinalStatus.landed()
        elif isinstance(event, MissionTimeout):
            self.final_status = FinalStatus.aborted("timeout")
        return event


    def __aiter__(self):
        return self


    async def __anext__(self) -> TelemetryEvent:
        event = await self.next_event()
        if event is None:
            raise StopAsyncIteration
        return event


    def ensure_active(self) -> None:
        if self.final_status is not None:
            raise StaleHandle(f"mission already ended ({self.final_status})")


class VehicleLink(ABC):
    def __init__(self, registry: ParamRegistry):
        self.registry = registry


    @abstractmethod
    async def start_mission(self, params: Mapping[str, float], plan: MissionPlan) -> MissionHandle:
        ...


    @abstractmethod
    async def upload_params(self, handle: MissionHandle, fix: Mapping[str, float]) -> ParamsAck:
        ...


    @abstractmethod
    async def stop_mission(self, handle: MissionHandle) -> FinalStatus:
        ...


    async def close(self) -> None:
        pass


    async def __aenter__(self):
        return self


    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.close()
