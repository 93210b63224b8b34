import asyncio
import logging
from typing import Annotated, List, Literal, Mapping, Optional, Sequence, Tuple, Union
from urllib.parse import urlparse

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from flightfix.services.paramdb import ParamRegistry
from flightfix.services.telemetry.link import MissionHandle, VehicleLink
from flightfix.services.telemetry.models import (
    FinalStatus,
    FlightSample,
    Landed,
    MissionEnd,
    MissionPlan,
    MissionTimeout,
    ParamsAck,
    StatusText,
    TelemetryEvent,
    Vector3,
    WaypointReached,
)


logger = logging.getLogger(__name__)

EVENT_TYPES = (FlightSample, StatusText, WaypointReached, Landed, MissionTimeout)


class WireError(ValueError):
    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{prefix}{message}")


class PlanFrame(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["plan"] = "plan"
    plan: MissionPlan


class GeoSample(BaseModel):
    """Geodetic sample from an external log; converted to a FlightSample on ingest."""

    model_config = ConfigDict(frozen=True)

    type: Literal["geo_sample"] = "geo_sample"
    t: float = Field(ge=0)
    lat: float = Field(ge=-90, le=90)
    lon: float = Field(ge=-180, le=180)
    alt: float
    vel: Vector3 = (0.0, 0.0, 0.0)


class StartMission(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["start_mission"] = "start_mission"
    params: dict[str, float] = Field(default_factory=dict)
    plan: MissionPlan
    # false: the vehicle steps only when the harness asks
    realtime: bool = False


class UploadParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["upload_params"] = "upload_params"
    params: dict[str, float]


class StopMission(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["stop_mission"] = "stop_mission"


class StepRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["step"] = "step"


class StepDone(BaseModel):
    """Closes the events of one requested step."""

    model_config = ConfigDict(frozen=True)

    type: Literal["step_done"] = "step_done"
    t: float = Field(ge=0)


Frame = Annotated[
    Union[
        FlightSample,
        StatusText,
        WaypointReached,
        Landed,
        MissionTimeout,
        ParamsAck,
        MissionEnd,
        PlanFrame,
        GeoSample,
        StartMission,
        UploadParams,
        StopMission,
        StepRequest,
        StepDone,
    ],
    Field(discriminator="type"),
]

_FRAME = TypeAdapter(Frame)


def encode(frame: BaseModel) -> str:
    return frame.model_dump_json(exclude_none=True)


def encode_line(frame: BaseModel) -> bytes:
    return (encode(frame) + "\n").encode("utf-8")


def decode(line: str | bytes, line_no: Optional[int] = None) -> BaseModel:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as e:
            raise WireError(f"not UTF-8: {e}", line_no) from e
    line = line.rstrip("\n")
    if not line.strip():
        raise WireError("empty frame", line_no)
    try:
        return _FRAME.validate_json(line)
    except ValidationError as e:
        reason = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
        raise WireError(reason, line_no) from e


def decode_event(line: str | bytes, line_no: Optional[int] = None) -> TelemetryEvent:
    frame = decode(line, line_no)
    if not isinstance(frame, EVENT_TYPES):
        raise WireError(f"expected a telemetry event, got '{frame.type}'", line_no)
    return frame


class WireHandle(MissionHandle):
    """Event stream of a remote vehicle.

    Unless realtime, the vehicle advances one step per ``step`` frame and the
    handle asks for the next step only once the previous one is consumed, so
    vehicle time stands still while the consumer is busy.
    """


    def __init__(
        self,
        plan: MissionPlan,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        process: Optional[asyncio.subprocess.Process] = None,
        realtime: bool = False,
    ):
        super().__init__(plan)
        self.realtime = realtime
        self._reader = reader
        self._writer = writer
        self._process = process
        self._queue: asyncio.Queue = asyncio.Queue()
        self._pending_ack: Optional[asyncio.Future] = None
        self._end_status: Optional[FinalStatus] = None
        self._error: Optional[WireError] = None
        self._stopped = False
        self._awaiting_step = False
        self._pump_task = asyncio.create_task(self._pump())


    async def _pump(self) -> None:
        line_no = 0
        stream_t = 0.0
        try:
            while True:
                line = await self._reader.readline()
                if not line:
                    break
                line_no += 1
                frame = decode(line, line_no)
                if isinstance(frame, ParamsAck):
                    if self._pending_ack is not None and not self._pending_ack.done():
                        self._pending_ack.set_result(frame)
                elif isinstance(frame, MissionEnd):
                    self._end_status = frame.status
                elif isinstance(frame, StepDone):
                    await self._queue.put(frame)
                elif isinstance(frame, EVENT_TYPES):
                    if frame.t < stream_t:
                        raise WireError(f"event time {frame.t} precedes {stream_t}", line_no)
                    stream_t = frame.t
                    await self._queue.put(frame)
                else:
                    logger.warning("Ignoring unexpected '%s' frame from vehicle", frame.type)
        except WireError as e:
            logger.error("Malformed frame from vehicle: %s", e)
            self._error = e
        except (ConnectionError, asyncio.IncompleteReadError) as e:
            logger.warning("Vehicle stream dropped: %s", e)
        finally:
            if self._pending_ack is not None and not self._pending_ack.done():
                self._pending_ack.set_exception(ConnectionError("vehicle stream closed before ack"))
            await self._queue.put(None)


    @property
    def end_status(self) -> Optional[FinalStatus]:
        return self._end_status


    async def _request_step(self) -> None:
        self._awaiting_step = True
        try:
            self._writer.write(encode_line(StepRequest()))
            await self._writer.drain()
        except (ConnectionError, RuntimeError) as e:
            # the vehicle already closed; the pump delivers the end of stream
            logger.debug("Step request not delivered: %s", e)


    async def _receive(self) -> Optional[TelemetryEvent]:
        while True:
            if not self.realtime and not self._awaiting_step and self._queue.empty():
                await self._request_step()
            event = await self._queue.get()
            if not isinstance(event, StepDone):
                break
            self._awaiting_step = False

        if event is None:
            if self._error is not None:
                raise self._error
            if self._end_status is not None and self.final_status is None:
                self.final_status = self._end_status
        return event


    async def request_ack(self, frame: UploadParams, timeout: float) -> ParamsAck:
        self._pending_ack = asyncio.get_running_loop().create_future()
        self._writer.write(encode_line(frame))
        await self._writer.drain()
        return await asyncio.wait_for(self._pending_ack, timeout)


    async def shutdown(self) -> None:
        if self._stopped:
            return
        self._stopped = True
        try:
            self._writer.write(encode_line(StopMission()))
            await self._writer.drain()
        except (ConnectionError, RuntimeError):
            pass
        self._writer.close()
        try:
            await self._writer.wait_closed()
        except (ConnectionError, BrokenPipeError):
            pass
        self._pump_task.cancel()
        try:
            await self._pump_task
        except asyncio.CancelledError:
            pass
        if self._process is not None:
            try:
                await asyncio.wait_for(self._process.wait(), 5.0)
            except asyncio.TimeoutError:
                self._process.kill()
                await self._process.wait()


class WireLink(VehicleLink):
    """Vehicle reached over newline-delimited JSON, either TCP or a child process' stdio."""


    def __init__(
        self,
        registry: ParamRegistry,
        host: Optional[str] = None,
        port: Optional[int] = None,
        argv: Optional[Sequence[str]] = None,
        connect_timeout: float = 5.0,
        ack_timeout: float = 5.0,
        realtime: bool = False,
    ):
        super().__init__(registry)
        if argv is None and (host is None or port is None):
            raise ValueError("WireLink needs either host/port or argv")
        self.host = host
        self.port = port
        self.argv: Optional[List[str]] = list(argv) if argv is not None else None
        self.connect_timeout = connect_timeout
        self.ack_timeout = ack_timeout
        self.realtime = realtime


    @classmethod
    def from_url(cls, registry: ParamRegistry, url: str, **kwargs) -> "WireLink":
        parsed = urlparse(url)
        if parsed.scheme != "tcp" or not parsed.hostname or not parsed.port:
            raise ValueError(f"expected tcp://host:port, got {url!r}")
        return cls(registry, host=parsed.hostname, port=parsed.port, **kwargs)


    async def _open(
        self,
    ) -> Tuple[asyncio.StreamReader, asyncio.StreamWriter, Optional[asyncio.subprocess.Process]]:
        if self.argv is not None:
            try:
                process = await asyncio.create_subprocess_exec(
                    *self.argv,
                    stdin=asyncio.subprocess.PIPE,
                    stdout=asyncio.subprocess.PIPE,
                )
            except OSError as e:
                raise ConnectionError(f"cannot spawn vehicle process {self.argv[0]!r}: {e}") from e
            return process.stdout, process.stdin, process

        try:
            reader, writer = await asyncio.wait_for(
                asyncio.open_connection(self.host, self.port), self.connect_timeout
            )
        except (OSError, asyncio.TimeoutError) as e:
            raise ConnectionError(f"cannot reach vehicle at {self.host}:{self.port}: {e!r}") from e
        return reader, writer, None


    async def start_mission(self, params: Mapping[str, float], plan: MissionPlan) -> WireHandle:
        self.registry.require_valid(params)
        reader, writer, process = await self._open()
        writer.write(encode_line(StartMission(params=dict(params), plan=plan, realtime=self.realtime)))
        await writer.drain()
        logger.info("Mission started over wire link (%d params)", len(params))
        return WireHandle(plan, reader, writer, process, realtime=self.realtime)


    async def upload_params(self, handle: WireHandle, fix: Mapping[str, float]) -> ParamsAck:
        handle.ensure_active()
        self.registry.require_valid(fix)
        if not fix:
            return ParamsAck(t=handle.last_t)
        try:
            return await handle.request_ack(UploadParams(params=dict(fix)), self.ack_timeout)
        except asyncio.TimeoutError as e:
            raise ConnectionError(f"no params_ack within {self.ack_timeout}s") from e


    async def stop_mission(self, handle: WireHandle) -> FinalStatus:
        await handle.shutdown()
        if handle.final_status is None:
            handle.final_status = handle.end_status or FinalStatus.aborted("stopped")
        return handle.final_status
