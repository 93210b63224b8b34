"""The simulator as a wire-protocol vehicle, over TCP or stdio.

One connection runs one mission: the peer sends ``start_mission``, then may
send ``upload_params`` and ``stop_mission`` while telemetry streams back.
Unless the start frame asks for realtime pacing, the vehicle advances one step
per ``step`` frame and closes each step with ``step_done``. The stream ends
with a ``mission_end`` frame carrying the final status.
"""
import argparse
import asyncio
import logging
import sys
from typing import Optional

from flightfix.loader import load_config, load_harness_registry
from flightfix.services.paramdb import ParamRegistry, ParamValidationError
from flightfix.services.simdrone.faults import FaultModel
from flightfix.services.simdrone.model import SimConfig, Simulator
from flightfix.services.telemetry.models import FinalStatus, MissionEnd, ParamsAck
from flightfix.services.telemetry.wire import (
    StartMission,
    StepDone,
    StepRequest,
    StopMission,
    UploadParams,
    WireError,
    decode,
    encode_line,
)
from flightfix.utils.logs import setup_logging


logger = logging.getLogger(__name__)


class SimServer:
    def __init__(self, registry: ParamRegistry, config: SimConfig):
        self.registry = registry
        self.config = config
        self.fault_model = FaultModel(config.fault_table, registry)


    async def serve(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            start = await self._read_start(reader)
        except (WireError, ParamValidationError) as e:
            logger.error("Rejected mission start: %s", e)
            writer.close()
            return
        if start is None:
            writer.close()
            return

        effective = {**self.registry.defaults(), **start.params}
        simulator = Simulator(self.config, start.plan, effective, self.fault_model)
        controls: asyncio.Queue = asyncio.Queue()
        listener = asyncio.create_task(self._listen(reader, controls))
        try:
            if start.realtime:
                await self._run_realtime(simulator, controls, writer)
            else:
                await self._run_paced(simulator, controls, writer)

            status = simulator.final_status or FinalStatus.aborted("stopped")
            writer.write(encode_line(MissionEnd(t=simulator.state.t, status=status)))
            await writer.drain()
            logger.info("Mission over: %s", status)
        except (ConnectionError, BrokenPipeError) as e:
            logger.warning("Harness went away: %s", e)
        finally:
            listener.cancel()
            writer.close()


    async def _run_paced(self, simulator: Simulator, controls: asyncio.Queue, writer: asyncio.StreamWriter) -> None:
        while not simulator.finished:
            frame = await controls.get()
            if isinstance(frame, StopMission):
                return
            if isinstance(frame, UploadParams):
                self._apply(simulator, frame, writer)
            else:
                for event in simulator.step():
                    writer.write(encode_line(event))
                writer.write(encode_line(StepDone(t=simulator.state.t)))
            await writer.drain()


    async def _run_realtime(self, simulator: Simulator, controls: asyncio.Queue, writer: asyncio.StreamWriter) -> None:
        while not simulator.finished:
            while not controls.empty():
                frame = controls.get_nowait()
                if isinstance(frame, StopMission):
                    return
                if isinstance(frame, UploadParams):
                    self._apply(simulator, frame, writer)
            for event in simulator.step():
                writer.write(encode_line(event))
            await writer.drain()
            await asyncio.sleep(self.config.dt)


    @staticmethod
    def _apply(simulator: Simulator, frame: UploadParams, writer: asyncio.StreamWriter) -> None:
        t = simulator.apply_params(frame.params)
        writer.write(encode_line(ParamsAck(t=t, params=frame.params)))


    async def _read_start(self, reader: asyncio.StreamReader) -> Optional[StartMission]:
        line = await reader.readline()
        if not line:
            return None
        frame = decode(line, 1)
        if not isinstance(frame, StartMission):
            raise WireError(f"expected start_mission, got '{frame.type}'", 1)
        self.registry.require_valid(frame.params)
        return frame


    async def _listen(self, reader: asyncio.StreamReader, controls: asyncio.Queue) -> None:
        line_no = 1
        while True:
            line = await reader.readline()
            if not line:
                await controls.put(StopMission())
                return
            line_no += 1
            try:
                frame = decode(line, line_no)
            except WireError as e:
                logger.warning("Ignoring malformed control frame: %s", e)
                continue
            if isinstance(frame, UploadParams):
                try:
                    self.registry.require_valid(frame.params)
                except ParamValidationError as e:
                    logger.warning("Ignoring invalid upload: %s", e)
                    continue
                await controls.put(frame)
            elif isinstance(frame, (StopMission, StepRequest)):
                await controls.put(frame)
            else:
                logger.warning("Ignoring unexpected '%s' frame from harness", frame.type)


async def stdio_streams():
    loop = asyncio.get_running_loop()
    reader = asyncio.StreamReader()
    await loop.connect_read_pipe(lambda: asyncio.StreamReaderProtocol(reader), sys.stdin)
    transport, protocol = await loop.connect_write_pipe(asyncio.streams.FlowControlMixin, sys.stdout)
    writer = asyncio.StreamWriter(transport, protocol, reader, loop)
    return reader, writer


async def run_server(server: SimServer, host: Optional[str], port: Optional[int]) -> None:
    if port is None:
        reader, writer = await stdio_streams()
        await server.serve(reader, writer)
        return
    tcp = await asyncio.start_server(server.serve, host, port)
    logger.info("Simulated vehicle listening on %s:%d", host, port)
    async with tcp:
        await tcp.serve_forever()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="flightfix-sim", description="Simulated vehicle speaking the telemetry wire protocol")
    parser.add_argument("--config", help="harness config file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, help="listen on TCP instead of stdio")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    args = parser.parse_args(argv)

    config = load_config(args.config, log_level=args.log_level)
    # stdout carries the protocol, so logs go to stderr
    setup_logging(config.log_level, stream=sys.stderr)
    registry = load_harness_registry(config)
    asyncio.run(run_server(SimServer(registry, config.sim), args.host, args.port))
    return 0


if __name__ == "__main__":
    sys.exit(main())
