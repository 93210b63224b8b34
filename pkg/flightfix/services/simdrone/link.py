import asyncio
import logging
from collections import deque
from typing import Deque, Mapping, Optional

from flightfix.services.paramdb import ParamRegistry
from flightfix.services.simdrone.faults import FaultModel
from flightfix.services.simdrone.model import SimConfig, Simulator, StepHook
from flightfix.services.telemetry.link import MissionHandle, VehicleLink
from flightfix.services.telemetry.models import FinalStatus, MissionPlan, ParamsAck, TelemetryEvent


logger = logging.getLogger(__name__)


class SimHandle(MissionHandle):
    """Event stream of an in-process simulator.

    In virtual time the simulator is stepped on demand, so it never runs ahead
    of the consumer. In realtime mode a producer task steps it once per dt of
    wall clock and the consumer reads from a queue.
    """


    def __init__(self, plan: MissionPlan, simulator: Simulator, realtime: bool = False):
        super().__init__(plan)
        self.simulator = simulator
        self.realtime = realtime
        self._buffer: Deque[TelemetryEvent] = deque()
        self._queue: Optional[asyncio.Queue] = None
        self._producer: Optional[asyncio.Task] = None
        if realtime:
            self._queue = asyncio.Queue()
            self._producer = asyncio.create_task(self._produce())


    async def _produce(self) -> None:
        try:
            while not self.simulator.finished:
                for event in self.simulator.step():
                    await self._queue.put(event)
                await asyncio.sleep(self.simulator.config.dt)
        finally:
            await self._queue.put(None)


    async def _receive(self) -> Optional[TelemetryEvent]:
        if self.realtime:
            event = await self._queue.get()
        else:
            while not self._buffer and not self.simulator.finished:
                self._buffer.extend(self.simulator.step())
                # yield so parallel missions interleave
                await asyncio.sleep(0)
            event = self._buffer.popleft() if self._buffer else None

        if event is None and self.final_status is None:
            self.final_status = self.simulator.final_status
        return event


    async def close(self) -> None:
        if self._producer is not None and not self._producer.done():
            self._producer.cancel()
            try:
                await self._producer
            except asyncio.CancelledError:
                pass


class SimLink(VehicleLink):
    def __init__(
        self,
        registry: ParamRegistry,
        config: SimConfig,
        fault_model: Optional[FaultModel] = None,
        on_step: Optional[StepHook] = None,
    ):
        super().__init__(registry)
        self.config = config
        self.fault_model = fault_model or FaultModel(config.fault_table, registry)
        self.on_step = on_step


    async def start_mission(self, params: Mapping[str, float], plan: MissionPlan) -> SimHandle:
        self.registry.require_valid(params)
        effective = {**self.registry.defaults(), **params}
        simulator = Simulator(self.config, plan, effective, self.fault_model, self.on_step)
        logger.debug("Simulated mission started: %d waypoints, severities %s", len(plan.waypoints), simulator.severities)
        return SimHandle(plan, simulator, realtime=self.config.realtime)


    async def upload_params(self, handle: SimHandle, fix: Mapping[str, float]) -> ParamsAck:
        handle.ensure_active()
        self.registry.require_valid(fix)
        if not fix:
            return ParamsAck(t=handle.simulator.state.t)
        t = handle.simulator.apply_params(fix)
        return ParamsAck(t=t, params=dict(fix))


    async def stop_mission(self, handle: SimHandle) -> FinalStatus:
        await handle.close()
        if handle.final_status is None:
            handle.final_status = handle.simulator.final_status or FinalStatus.aborted("stopped")
        return handle.final_status
