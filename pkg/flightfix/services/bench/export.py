import csv
import json
import logging
from pathlib import Path
from typing import Iterable, Literal, Sequence

from flightfix.services.bench.metrics import BenchReport
from flightfix.services.repair import RepairRecord
from flightfix.services.telemetry.models import MissionPlan, TelemetryEvent
from flightfix.services.telemetry.wire import PlanFrame, encode


logger = logging.getLogger(__name__)

ReportFormat = Literal["json", "csv"]

REPORT_COLUMNS = ["case_id", "result", "repair_count", "anomalies"]
TRACE_COLUMNS = ["t", "x", "y", "z", "cross_track", "marker"]


class ExportError(OSError):
    pass


def _write(path: Path, write) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            write(fh)
    except OSError as e:
        raise ExportError(f"cannot write {path}: {e}") from e
    logger.debug("Wrote %s", path)
    return path


def export_report(report: BenchReport, fmt: ReportFormat, target: Path | str) -> Path:
    """Write a benchmark report as JSON or as a per-case CSV with a metrics footer."""
    path = Path(target)
    if fmt == "json":
        return _write(path, lambda fh: fh.write(report.model_dump_json(indent=2) + "\n"))
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")

    def write_csv(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for case in report.per_case:
            writer.writerow([case.case_id, case.result, case.repair_count, "|".join(case.anomalies)])
        if report.per_case:
            writer.writerow([])
            writer.writerow(["# TTC", report.ttc])
            writer.writerow(["# NRC", report.nrc])
            writer.writerow(["# TRA", report.tra])
            writer.writerow(["# RSR", report.rsr.display])
            writer.writerow(["# ANR", report.anr.display])

    return _write(path, write_csv)


def export_trace(record: RepairRecord, target: Path | str) -> Path:
    """Trajectory CSV; markers land on the first sample at or after their time."""
    path = Path(target)
    markers = sorted(record.markers, key=lambda m: m.t)

    def write_csv(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        pending = 0
        for point in record.trace:
            labels = []
            while pending < len(markers) and markers[pending].t <= point.t:
                marker = markers[pending]
                labels.append(f"{marker.kind}:{marker.detail}" if marker.detail else marker.kind)
                pending += 1
            writer.writerow([
                f"{point.t:.3f}", f"{point.x:.3f}", f"{point.y:.3f}", f"{point.z:.3f}",
                f"{point.cross_track:.3f}", ";".join(labels),
            ])

    return _write(path, write_csv)


def write_record(record: RepairRecord, target: Path | str) -> Path:
    path = Path(target)
    return _write(path, lambda fh: fh.write(record.model_dump_json(indent=2) + "\n"))


def write_jsonl(rows: Iterable[dict], target: Path | str) -> Path:
    path = Path(target)

    def write(fh) -> None:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    return _write(path, write)


def write_audit(record: RepairRecord, target: Path | str) -> Path:
    return write_jsonl((entry.model_dump(mode="json") for entry in record.audit), target)


def write_telemetry(plan: MissionPlan, events: Sequence[TelemetryEvent], target: Path | str) -> Path:
    """Wire-format trace, replayable: a plan frame followed by every event in arrival order."""
    path = Path(target)

    def write(fh) -> None:
        fh.write(encode(PlanFrame(plan=plan)) + "\n")
        for event in events:
            fh.write(encode(event) + "\n")

    return _write(path, write)
