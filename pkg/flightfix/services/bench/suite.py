import logging
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from flightfix.services.paramdb import ParamRegistry, SchemaError
from flightfix.services.simdrone.faults import DEFAULT_FAULT_TABLE, FaultClass
from flightfix.services.telemetry.models import MissionPlan


logger = logging.getLogger(__name__)

SEVERITY_LEVELS = (0.5, 1.2, 1.6, 2.5)

# misconfigured value of each fault parameter at each severity level
SUITE_VALUES: Dict[str, Tuple[float, float, float, float]] = {
    "ATC_RAT_RLL_P": (0.195, 0.28, 0.33, 0.44),
    "ATC_RAT_PIT_P": (0.195, 0.28, 0.33, 0.44),
    "MOT_THST_EXPO": (0.5, 0.29, 0.17, -0.1),
    "MOT_THST_HOVER": (0.32, 0.42, 0.475, 0.6025),
    "PSC_VELXY_P": (2.7, 3.8, 4.4, 5.7),
    "WPNAV_ACCEL": (160.0, 240.0, 280.0, 380.0),
    "PSC_ACCZ_P": (0.45, 0.7, 0.8, 1.1),
    "PSC_POSZ_P": (1.25, 1.6, 1.8, 2.25),
}

CROSS_CLASS_LEVELS = ((1.2, 1.2), (1.2, 1.6), (1.6, 1.2), (1.6, 1.6), (2.5, 1.2))
SAME_CLASS_LEVELS = ((1.2, 1.6), (1.6, 1.2), (1.6, 1.6), (2.5, 1.2))

SUITE_PLANS: Dict[str, MissionPlan] = {
    "square": MissionPlan(
        waypoints=[(0.0, 0.0, 10.0), (60.0, 0.0, 10.0), (60.0, 60.0, 10.0), (0.0, 60.0, 10.0), (0.0, 0.0, 10.0)],
        cruise_speed=5.0,
    ),
    "survey": MissionPlan(
        waypoints=[(0.0, 0.0, 10.0), (80.0, 0.0, 10.0), (80.0, 20.0, 10.0), (0.0, 20.0, 10.0), (0.0, 40.0, 10.0), (80.0, 40.0, 10.0)],
        cruise_speed=5.0,
    ),
}


class BenchCase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    case_id: str = Field(min_length=1)
    overrides: Dict[str, float] = Field(default_factory=dict)
    plan_id: str


class SuiteHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    plans: Dict[str, MissionPlan]


class Suite(BaseModel):
    plans: Dict[str, MissionPlan]
    cases: List[BenchCase] = Field(default_factory=list)


    def plan_for(self, case: BenchCase) -> MissionPlan:
        return self.plans[case.plan_id]


def _value(name: str, level: float) -> float:
    return SUITE_VALUES[name][SEVERITY_LEVELS.index(level)]


def generate_suite() -> Suite:
    """The shipped synthetic suite: single-, two- and three-fault misconfigurations."""
    names = list(SUITE_VALUES)
    plan_ids = list(SUITE_PLANS)
    cases: List[BenchCase] = []

    n = 0
    for plan_id in plan_ids:
        for name in names:
            for level in SEVERITY_LEVELS:
                # benign level only once
                if level == SEVERITY_LEVELS[0] and plan_id != plan_ids[0]:
                    continue
                n += 1
                cases.append(BenchCase(case_id=f"single-{n:03d}", overrides={name: _value(name, level)}, plan_id=plan_id))

    def fault_class(name: str) -> FaultClass:
        return DEFAULT_FAULT_TABLE[name].fault_class

    cross = [(a, b) for a, b in combinations(names, 2) if fault_class(a) is not fault_class(b)]
    same = [(a, b) for a, b in combinations(names, 2) if fault_class(a) is fault_class(b)]
    n = 0
    for pairs, levels in ((cross, CROSS_CLASS_LEVELS), (same, SAME_CLASS_LEVELS)):
        for a, b in pairs:
            for level_a, level_b in levels:
                cases.append(
                    BenchCase(
                        case_id=f"pair-{n + 1:03d}",
                        overrides={a: _value(a, level_a), b: _value(b, level_b)},
                        plan_id=plan_ids[n % 2],
                    )
                )
                n += 1

    by_class: Dict[FaultClass, List[str]] = {}
    for name in names:
        by_class.setdefault(fault_class(name), []).append(name)
    n = 0
    for plan_index, plan_id in enumerate(plan_ids):
        for classes in combinations(list(FaultClass), 3):
            n += 1
            overrides = {by_class[c][plan_index]: _value(by_class[c][plan_index], 2.5) for c in classes}
            cases.append(BenchCase(case_id=f"triple-{n:03d}", overrides=overrides, plan_id=plan_id))

    return Suite(plans=dict(SUITE_PLANS), cases=cases)


def load_suite(source: Path | str, registry: ParamRegistry) -> Suite:
    path = Path(source)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].strip():
        raise SchemaError(f"{path}: missing suite header line")

    try:
        header = SuiteHeader.model_validate_json(lines[0])
    except ValidationError as e:
        raise SchemaError(f"{path}:1: invalid suite header: {e.errors()[0]['msg']}") from e

    cases: List[BenchCase] = []
    seen = set()
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            case = BenchCase.model_validate_json(line)
        except ValidationError as e:
            raise SchemaError(f"{path}:{line_no}: invalid case: {e.errors()[0]['msg']}") from e
        if case.case_id in seen:
            raise SchemaError(f"{path}:{line_no}: duplicate case_id {case.case_id}")
        if case.plan_id not in header.plans:
            raise SchemaError(f"{path}:{line_no}: case {case.case_id} references unknown plan {case.plan_id!r}")
        violations = registry.validate(case.overrides)
        if violations:
            raise SchemaError(f"{path}:{line_no}: case {case.case_id}: {'; '.join(map(str, violations))}")
        seen.add(case.case_id)
        cases.append(case)

    logger.info("Loaded %d cases over %d plans from %s", len(cases), len(header.plans), path)
    return Suite(plans=header.plans, cases=cases)


def dump_suite(suite: Suite, target: Path | str) -> Path:
    path = Path(target)
    lines = [SuiteHeader(plans=suite.plans).model_dump_json()]
    lines.extend(case.model_dump_json() for case in suite.cases)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
