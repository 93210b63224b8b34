import asyncio
import csv
import json
from collections import Counter
from fractions import Fraction

import pytest

from flightfix.config import DEFAULT_REGISTRY_PATH, DEFAULT_SUITE_PATH
from flightfix.services.anomaly.detectors import AnomalyType, DetectorConfig
from flightfix.services.api.advisor import Advisor, AdvisorConfig
from flightfix.services.api.mock import MockBackend, MockMode
from flightfix.services.bench.export import ExportError, export_report, export_trace, write_telemetry
from flightfix.services.bench.metrics import (
    UNDEFINED,
    BenchReport,
    CaseSummary,
    aggregate,
    combine,
    compute_anr,
    compute_rsr,
    percent_display,
    ratio_display,
    summarize,
)
from flightfix.services.bench.runner import run_suite
from flightfix.services.bench.suite import SUITE_PLANS, BenchCase, Suite, dump_suite, generate_suite, load_suite
from flightfix.services.paramdb import SchemaError, load_registry
from flightfix.services.repair import Marker, MissionResult, OrchestratorConfig, RepairRecord, TracePoint
from flightfix.services.simdrone.faults import default_fault_model
from flightfix.services.simdrone.link import SimLink
from flightfix.services.simdrone.model import SimConfig
from flightfix.services.telemetry.models import Landed
from flightfix.services.telemetry.wire import PlanFrame, decode


@pytest.fixture(scope="module")
def registry():
    return load_registry(DEFAULT_REGISTRY_PATH)


@pytest.fixture(scope="module")
def fault_model(registry):
    return default_fault_model(registry)


def case(case_id, passed, repairs, anomalies=(), fault_classes=()):
    return CaseSummary(
        case_id=case_id,
        result="Passed" if passed else "Failed(repair-limit)",
        passed=passed,
        repair_count=repairs,
        anomalies=list(anomalies),
        fault_classes=list(fault_classes),
    )


def report_a():
    return aggregate(
        [
            case("a3", True, 1, ["Timeout"], ["timeout"]),
            case("a1", True, 1, ["Deviation"], ["deviation"]),
            case("a4", False, 0),
            case("a2", True, 1, ["Crash"], ["crash"]),
        ],
        label="model-a",
    )


def report_b():
    return aggregate(
        [
            case("b1", True, 3, ["Deviation", "Timeout", "Deviation"], ["deviation", "timeout"]),
            case("b2", False, 5, ["Crash"] * 5, ["crash"]),
        ],
        label="model-b",
    )


# suite

def test_shipped_suite_matches_generator(registry):
    suite = load_suite(DEFAULT_SUITE_PATH, registry)
    assert suite == generate_suite()
    assert len(suite.cases) == 200
    assert Counter(c.case_id.split("-")[0] for c in suite.cases) == {"single": 56, "pair": 136, "triple": 8}
    assert set(suite.plans) == {"square", "survey"}


def test_suite_cases_carry_their_fault_classes(registry, fault_model):
    suite = generate_suite()
    triples = [c for c in suite.cases if c.case_id.startswith("triple-")]
    for triple in triples:
        classes = {risk.fault_class for risk in fault_model.risks({**registry.defaults(), **triple.overrides})}
        assert len(classes) == 3


def _suite_file(tmp_path, extra_lines):
    path = dump_suite(Suite(plans={"square": SUITE_PLANS["square"]}), tmp_path / "suite.jsonl")
    with path.open("a", encoding="utf-8") as fh:
        for line in extra_lines:
            fh.write(line + "\n")
    return path


def test_header_only_suite_is_empty(tmp_path, registry):
    assert load_suite(_suite_file(tmp_path, []), registry).cases == []


@pytest.mark.parametrize(
    "lines, message",
    [
        (
            ['{"case_id": "c1", "overrides": {}, "plan_id": "square"}', '{"case_id": "c1", "overrides": {}, "plan_id": "square"}'],
            "duplicate",
        ),
        (['{"case_id": "c1", "overrides": {}, "plan_id": "figure-eight"}'], "unknown plan"),
        (['{"case_id": "c1", "overrides": {"PSC_VELXY_P": 60.0}, "plan_id": "square"}'], "PSC_VELXY_P"),
        (['{"case_id": "c1", "overrides": {}}'], "invalid case"),
    ],
)
def test_suite_errors_name_the_line(tmp_path, registry, lines, message):
    path = _suite_file(tmp_path, lines)
    with pytest.raises(SchemaError, match=message) as exc:
        load_suite(path, registry)
    assert f"suite.jsonl:{len(lines) + 1}" in str(exc.value)


def test_empty_suite_file_is_rejected(tmp_path, registry):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(SchemaError):
        load_suite(path, registry)


# metrics

def test_metric_displays():
    assert percent_display(compute_rsr(1380, 1421)) == "97%"
    assert ratio_display(compute_anr(1613, 1380)) == "1.17"
    assert ratio_display(compute_anr(3415, 1171)) == "2.92"
    # half-up, never banker's rounding
    assert percent_display(Fraction(5, 2)) == "3%"
    assert ratio_display(Fraction(1, 8)) == "0.13"
    assert ratio_display(Fraction(2)) == "2.00"


def test_undefined_metrics():
    assert compute_rsr(0, 0) is UNDEFINED
    assert compute_anr(0, 0) is UNDEFINED
    assert percent_display(UNDEFINED) == "undefined"
    empty = aggregate([])
    assert empty.rsr.exact == "undefined" and empty.rsr.value is None
    assert empty.anr.display == "undefined"


def test_aggregate_counts_repaired_passes():
    report = report_a()
    assert (report.ttc, report.nrc, report.tra, report.passed, report.failed) == (4, 3, 3, 3, 1)
    assert report.rsr.exact == "75/1"
    assert report.rsr.display == "75%"
    assert report.anr.display == "1.00"
    assert [(row.repair_count, row.passed, row.failed) for row in report.histogram] == [(0, 0, 1), (1, 3, 0)]
    assert [c.case_id for c in report.per_case] == ["a1", "a2", "a3", "a4"]


def test_aggregate_ignores_order():
    forward = report_b()
    backward = aggregate(list(reversed(forward.per_case)), label="model-b")
    assert forward == backward


def test_exact_ratio_survives_json():
    report = aggregate([case("x", True, 1613)] + [case(f"y{i:04d}", True, 0) for i in range(3)])
    restored = BenchReport.model_validate_json(report.model_dump_json())
    assert restored.anr_ratio == Fraction(1613)
    assert restored.rsr.exact == "25/1"


def test_summarize_by_fault_class():
    rows = {row.fault_class: row for row in summarize(report_a())}
    assert set(rows) == {"crash", "deviation", "none", "timeout"}
    assert (rows["none"].cases, rows["none"].passed) == (1, 0)
    assert rows["deviation"].anr == Fraction(1)


def test_combine_weights_models_and_cases():
    combined = combine([report_a(), report_b()])
    assert combined.labels == ["model-a", "model-b"]
    assert combined.model_weighted_rsr.display == "63%"
    assert combined.case_weighted_rsr.display == "67%"
    assert combined.model_weighted_anr.display == "2.00"
    assert combined.case_weighted_anr.display == "1.50"


def test_combine_with_undefined_model():
    nothing_repaired = aggregate([case("z", True, 0)])
    combined = combine([report_a(), nothing_repaired])
    assert combined.model_weighted_anr.exact == "undefined"
    assert combined.case_weighted_anr.display == "1.00"


# export

def test_export_csv_with_footer(tmp_path):
    path = export_report(report_a(), "csv", tmp_path / "report.csv")
    rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines()))
    assert rows[0] == ["case_id", "result", "repair_count", "anomalies"]
    assert rows[1] == ["a1", "Passed", "1", "Deviation"]
    assert rows[4] == ["a4", "Failed(repair-limit)", "0", ""]
    assert rows[5] == []
    assert rows[6:] == [["# TTC", "4"], ["# NRC", "3"], ["# TRA", "3"], ["# RSR", "75%"], ["# ANR", "1.00"]]


def test_export_empty_report_has_header_only(tmp_path):
    path = export_report(aggregate([]), "csv", tmp_path / "report.csv")
    assert path.read_text(encoding="utf-8") == "case_id,result,repair_count,anomalies\n"


def test_export_json(tmp_path):
    path = export_report(report_b(), "json", tmp_path / "out" / "report.json")
    body = json.loads(path.read_text(encoding="utf-8"))
    assert body["anr"] == {"exact": "3/1", "value": 3.0, "display": "3.00"}
    assert body["per_case"][1]["anomalies"] == ["Crash"] * 5


def test_export_to_unwritable_target(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(ExportError):
        export_report(report_a(), "csv", blocker / "report.csv")
    with pytest.raises(ValueError):
        export_report(report_a(), "xml", tmp_path / "report.xml")


def test_export_trace_places_markers(tmp_path):
    record = RepairRecord(
        case_id="c",
        p_initial={},
        result=MissionResult.passed(),
        trace=[TracePoint(t=round(0.1 * k, 1), x=float(k), y=0.5, z=10.0, cross_track=0.5) for k in range(1, 4)],
        markers=[
            Marker(t=0.15, kind="anomaly", detail="Deviation"),
            Marker(t=0.15, kind="upload", detail="ATC_RAT_RLL_P=0.135"),
        ],
    )
    lines = export_trace(record, tmp_path / "trace.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,x,y,z,cross_track,marker"
    assert lines[1] == "0.100,1.000,0.500,10.000,0.500,"
    assert lines[2].endswith(",anomaly:Deviation;upload:ATC_RAT_RLL_P=0.135")
    assert lines[3].endswith(",")


def test_telemetry_file_starts_with_plan(tmp_path):
    plan = SUITE_PLANS["square"]
    path = write_telemetry(plan, [Landed(t=70.0)], tmp_path / "telemetry.jsonl")
    first, second = path.read_text(encoding="utf-8").splitlines()
    assert decode(first) == PlanFrame(plan=plan)
    assert isinstance(decode(second), Landed)


# runner

def _bench(registry, fault_model, cases, parallelism):
    suite = Suite(plans=dict(SUITE_PLANS), cases=cases)
    seen = []

    async def scenario():
        advisor = Advisor(AdvisorConfig(), registry, MockBackend(registry, MockMode.OPTIMAL, fault_model))
        return await run_suite(
            suite,
            lambda: SimLink(registry, SimConfig(), fault_model),
            advisor,
            registry,
            DetectorConfig(),
            OrchestratorConfig(),
            parallelism=parallelism,
            fault_model=fault_model,
            label="mock-optimal",
            on_record=lambda record: seen.append(record.case_id),
        )

    report, records = asyncio.run(scenario())
    return report, records, seen


SMALL = [
    BenchCase(case_id="benign", overrides={}, plan_id="square"),
    BenchCase(case_id="deviation", overrides={"ATC_RAT_RLL_P": 0.44}, plan_id="square"),
    BenchCase(case_id="thrust", overrides={"MOT_THST_EXPO": -0.1}, plan_id="survey"),
    BenchCase(case_id="broken", overrides={"PSC_VELXY_P": 60.0}, plan_id="square"),
]


def test_run_suite(registry, fault_model):
    report, records, seen = _bench(registry, fault_model, SMALL, parallelism=3)
    assert sorted(seen) == sorted(c.case_id for c in SMALL)
    assert [r.case_id for r in records] == [c.case_id for c in SMALL]
    assert (report.ttc, report.passed, report.nrc, report.tra) == (4, 3, 2, 2)
    assert report.rsr.display == "50%"
    assert report.anr.display == "1.00"
    broken = records[3]
    assert broken.result == MissionResult.failed("infra")
    by_id = {c.case_id: c for c in report.per_case}
    assert by_id["deviation"].fault_classes == ["deviation"]
    assert by_id["thrust"].anomalies == [AnomalyType.THRUST_LOSS.value]
    assert by_id["benign"].fault_classes == []


def test_run_suite_report_independent_of_parallelism(registry, fault_model):
    serial, _, _ = _bench(registry, fault_model, SMALL[:3], parallelism=1)
    parallel, _, _ = _bench(registry, fault_model, SMALL[:3], parallelism=3)
    assert serial == parallel
