"""End-to-end checks over the shipped suite with the mock advisor in each mode."""
import asyncio

import numpy as np
import pytest

from flightfix.config import DEFAULT_REGISTRY_PATH, DEFAULT_SUITE_PATH
from flightfix.services.anomaly.detectors import AnomalyMonitor, AnomalyType, DetectorConfig
from flightfix.services.anomaly.geometry import point_to_leg_distance
from flightfix.services.api.advisor import Advisor, AdvisorConfig
from flightfix.services.api.mock import MockBackend, MockMode
from flightfix.services.bench.metrics import CaseSummary, aggregate, combine
from flightfix.services.bench.runner import run_suite
from flightfix.services.bench.suite import SUITE_PLANS, load_suite
from flightfix.services.paramdb import load_registry
from flightfix.services.repair import OrchestratorConfig, run_mission
from flightfix.services.simdrone.faults import default_fault_model
from flightfix.services.simdrone.link import SimLink
from flightfix.services.simdrone.model import SimConfig
from flightfix.services.telemetry.models import FlightSample, MissionPlan


@pytest.fixture(scope="module")
def registry():
    return load_registry(DEFAULT_REGISTRY_PATH)


@pytest.fixture(scope="module")
def fault_model(registry):
    return default_fault_model(registry)


@pytest.fixture(scope="module")
def suite(registry):
    return load_suite(DEFAULT_SUITE_PATH, registry)


def bench(registry, fault_model, suite, mode, parallelism=8):
    async def scenario():
        advisor = Advisor(AdvisorConfig(mock_mode=mode), registry, MockBackend(registry, mode, fault_model))
        return await run_suite(
            suite,
            lambda: SimLink(registry, SimConfig(), fault_model),
            advisor,
            registry,
            DetectorConfig(),
            OrchestratorConfig(),
            parallelism=parallelism,
            fault_model=fault_model,
            label=f"mock-{mode.value}",
        )

    return asyncio.run(scenario())


@pytest.fixture(scope="module")
def runs(registry, fault_model, suite):
    return {mode: bench(registry, fault_model, suite, mode) for mode in MockMode}


def triggered(case, registry, fault_model):
    return bool(fault_model.risks({**registry.defaults(), **case.overrides}))


# published aggregates

def histogram_cases(prefix, passes_by_repairs, untriggered_passes, triggered_fails, untriggered_fails):
    cases = []
    n = 0

    def add(passed, repairs):
        nonlocal n
        n += 1
        cases.append(CaseSummary(case_id=f"{prefix}-{n:05d}", result="Passed" if passed else "Failed", passed=passed, repair_count=repairs))

    for repairs, count in passes_by_repairs.items():
        for _ in range(count):
            add(True, repairs)
    for _ in range(untriggered_passes):
        add(True, 0)
    for _ in range(triggered_fails):
        add(False, 5)
    for _ in range(untriggered_fails):
        add(False, 0)
    return cases


def test_published_aggregates():
    strong = aggregate(histogram_cases("s", {1: 1148, 2: 231, 3: 1}, 39, 0, 2), label="strong")
    weak = aggregate(histogram_cases("w", {1: 309, 2: 172, 3: 237, 4: 214, 5: 239}, 39, 209, 2), label="weak")

    assert (strong.ttc, strong.nrc, strong.tra) == (1421, 1380, 1613)
    assert strong.rsr.display == "97%"
    assert strong.anr.display == "1.17"

    assert (weak.ttc, weak.nrc, weak.tra) == (1421, 1171, 3415)
    assert weak.rsr.display == "82%"
    # 2.9163 rounds half-up; the exact ratio is kept alongside
    assert weak.anr.display == "2.92"
    assert weak.anr.exact == "3415/1171"

    both = combine([strong, weak])
    assert both.model_weighted_anr.display == "2.04"
    assert both.case_weighted_anr.display == "1.97"
    assert both.model_weighted_rsr.display == "90%"


# geometry and detector boundaries

def test_distance_oracle_over_random_triples():
    rng = np.random.default_rng(2024)
    for p, a, b in rng.uniform(-500, 500, size=(1000, 3, 3)):
        expected = np.linalg.norm(np.cross(b - a, p - a)) / np.linalg.norm(b - a)
        assert point_to_leg_distance(p, a, b) == pytest.approx(expected, rel=1e-6, abs=1e-6)
    assert point_to_leg_distance((3.0, 4.0, 12.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)) == 13.0


LINE = MissionPlan(waypoints=[(0, 0, 10), (100, 0, 10)], cruise_speed=5.0)


def fire_count(config, samples):
    monitor = AnomalyMonitor(config, LINE)
    return [a.kind for a in (monitor.observe(s) for s in samples) if a is not None]


@pytest.mark.parametrize("window", range(1, 21))
def test_deviation_window_boundary(window):
    config = DetectorConfig(deviation_consecutive=window, takeoff_grace_s=0.0)
    off_track = [FlightSample(t=round(0.1 * k, 9), pos=(0.5 * k, 10.5, 10.0), vel=(5.0, 0.0, 0.0), alt=10.0) for k in range(window + 1)]
    assert fire_count(config, off_track[:window]) == []
    assert fire_count(config, off_track) == [AnomalyType.DEVIATION]


@pytest.mark.parametrize(
    "speed, climb, fires",
    [(0.99, 0.0, True), (1.01, 0.0, False), (0.0, 0.19, True), (0.0, 0.21, False)],
)
def test_timeout_thresholds(speed, climb, fires):
    config = DetectorConfig(takeoff_grace_s=0.0)
    samples = [
        FlightSample(t=round(0.1 * k, 9), pos=(0.0, 0.0, 10.0 + climb * k), vel=(speed, 0.0, 0.0), alt=10.0 + climb * k)
        for k in range(config.timeout_consecutive + 2)
    ]
    assert fire_count(config, samples) == ([AnomalyType.TIMEOUT] if fires else [])


# end to end

def test_optimal_advice_repairs_every_triggered_case(runs, registry, fault_model, suite):
    report, records = runs[MockMode.OPTIMAL]
    assert report.failed == 0
    assert report.rsr.display == "96%"
    for case, record in zip(suite.cases, records):
        if not triggered(case, registry, fault_model):
            assert record.repair_count == 0
        elif case.case_id.startswith("single-"):
            assert record.repair_count == 1, case.case_id
    assert report.nrc == sum(triggered(c, registry, fault_model) for c in suite.cases)


def test_noop_advice_exhausts_the_limit(runs, registry, fault_model, suite):
    report, records = runs[MockMode.NOOP]
    assert report.nrc == 0
    assert report.rsr.display == "0%"
    for case, record in zip(suite.cases, records):
        if triggered(case, registry, fault_model):
            assert str(record.result) == "Failed(repair-limit)", case.case_id
            assert len(record.anomaly_record) == record.repair_count == 5


def test_partial_advice_needs_several_rounds(runs):
    report, _ = runs[MockMode.PARTIAL]
    assert report.anr_ratio > 1
    assert report.rsr_ratio >= 90
    assert report.failed > 0


def test_invariants_hold_across_runs(runs, registry):
    for report, records in runs.values():
        for record in records:
            assert record.repair_count <= 5
            assert len(record.anomaly_record) == record.repair_count
            for advice in record.advice_log:
                assert registry.validate(advice.updates) == []
            times = [p.t for p in record.trace]
            assert times == sorted(times)


def test_report_independent_of_parallelism(runs, registry, fault_model, suite):
    serial, _ = bench(registry, fault_model, suite, MockMode.OPTIMAL, parallelism=1)
    parallel, _ = runs[MockMode.OPTIMAL]
    assert serial.model_dump_json() == parallel.model_dump_json()


def test_repair_reverses_deviation(registry, fault_model):
    async def scenario():
        link = SimLink(registry, SimConfig(), fault_model)
        advisor = Advisor(AdvisorConfig(), registry, MockBackend(registry, MockMode.OPTIMAL, fault_model))
        params = {**registry.defaults(), "ATC_RAT_RLL_P": 0.44}
        return await run_mission(link, params, SUITE_PLANS["square"], advisor, DetectorConfig(), OrchestratorConfig())

    record = asyncio.run(scenario())
    upload = next(m for m in record.markers if m.kind == "upload")
    before = [p.cross_track for p in record.trace if p.t <= upload.t]
    settled = [p.cross_track for p in record.trace if p.t >= upload.t + 3.0 and p.z >= 9.99]
    assert max(before) > 10.0
    assert settled and max(settled) < 10.0
    assert record.markers[0].kind == "anomaly" and record.markers[0].t <= upload.t
    assert record.repair_count == 1
