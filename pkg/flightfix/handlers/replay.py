import logging
from pathlib import Path
from typing import Iterable, List, Optional

from flightfix.handlers.common import EXIT_OK, INPUT_ERRORS, fail, load_context, load_plan
from flightfix.services.anomaly.detectors import AnomalyEvent, AnomalyMonitor, DetectorConfig, ProtocolError
from flightfix.services.telemetry.geo import GeoIngest
from flightfix.services.telemetry.models import MissionEnd, MissionPlan, ParamsAck
from flightfix.services.telemetry.wire import EVENT_TYPES, GeoSample, PlanFrame, WireError, decode


logger = logging.getLogger(__name__)


def add_parser(subparsers, parents) -> None:
    parser = subparsers.add_parser("replay", parents=parents, help="run the detectors offline over a recorded trace")
    parser.add_argument("trace", help="telemetry JSONL (as written by `run`, or geo_sample frames)")
    parser.add_argument("--plan", help="plan to measure against when the trace has no plan frame")
    parser.set_defaults(handler=handle)


def replay(lines: Iterable[str], detectors: DetectorConfig, plan: Optional[MissionPlan] = None) -> List[AnomalyEvent]:
    """Every anomaly the detectors would have fired on this trace, with no repairs in between."""
    monitor: Optional[AnomalyMonitor] = None
    geo = GeoIngest()
    anomalies: List[AnomalyEvent] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        frame = decode(line, line_no)
        if isinstance(frame, PlanFrame):
            if monitor is not None:
                raise WireError("plan frame after telemetry", line_no)
            plan = plan or frame.plan
            continue
        if isinstance(frame, (ParamsAck, MissionEnd)):
            continue
        if isinstance(frame, GeoSample):
            frame = geo.convert(frame.t, frame.lat, frame.lon, frame.alt, frame.vel)
        if not isinstance(frame, EVENT_TYPES):
            raise WireError(f"unexpected '{frame.type}' frame in a trace", line_no)

        if monitor is None:
            if plan is None:
                raise WireError("trace has no plan frame and no --plan was given", line_no)
            monitor = AnomalyMonitor(detectors, plan)
        anomaly = monitor.observe(frame)
        if anomaly is not None:
            anomalies.append(anomaly)
    return anomalies


def handle(args) -> int:
    try:
        ctx = load_context(args)
        plan = load_plan(args.plan) if args.plan else None
        with Path(args.trace).open(encoding="utf-8") as fh:
            anomalies = replay(fh, ctx.config.detector, plan)
    except INPUT_ERRORS + (ProtocolError,) as e:
        return fail(e)

    for anomaly in anomalies:
        print(f"{anomaly.t:8.1f}  {anomaly.kind.value:<10}  {anomaly.detail}")
    logger.info("%d anomalies in %s", len(anomalies), args.trace)
    return EXIT_OK
