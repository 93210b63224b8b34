"""Benchmark metrics.

RSR (repair success rate) is the share of cases that needed at least one
repair and still landed. ANR (average number of repairs) is the mean repair
count over those same cases. Both stay exact Fractions until display.
"""
import logging
import math
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field


logger = logging.getLogger(__name__)


class _Undefined:
    _instance = None


    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance


    def __repr__(self) -> str:
        return "Undefined"


    def __str__(self) -> str:
        return "undefined"


    def __bool__(self) -> bool:
        return False


UNDEFINED = _Undefined()
Ratio = Union[Fraction, _Undefined]


def compute_rsr(nrc: int, ttc: int) -> Ratio:
    """Percentage of repaired cases among all test cases."""
    if ttc == 0:
        return UNDEFINED
    return Fraction(100 * nrc, ttc)


def compute_anr(tra: int, nrc: int) -> Ratio:
    if nrc == 0:
        return UNDEFINED
    return Fraction(tra, nrc)


def round_half_up(value: Fraction, places: int) -> Fraction:
    scale = 10 ** places
    return Fraction(math.floor(value * scale + Fraction(1, 2)), scale)


def percent_display(rsr: Ratio) -> str:
    if rsr is UNDEFINED:
        return str(UNDEFINED)
    return f"{round_half_up(rsr, 0).numerator}%"


def ratio_display(anr: Ratio) -> str:
    if anr is UNDEFINED:
        return str(UNDEFINED)
    rounded = round_half_up(anr, 2)
    whole, cents = divmod(rounded.numerator * (100 // rounded.denominator), 100)
    return f"{whole}.{cents:02d}"


class MetricValue(BaseModel):
    model_config = ConfigDict(frozen=True)

    exact: str
    value: Optional[float] = None
    display: str


    @classmethod
    def of(cls, ratio: Ratio, display: str) -> "MetricValue":
        if ratio is UNDEFINED:
            return cls(exact=str(UNDEFINED), value=None, display=display)
        return cls(exact=f"{ratio.numerator}/{ratio.denominator}", value=float(ratio), display=display)


class CaseSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    case_id: str
    result: str
    passed: bool
    repair_count: int = Field(0, ge=0)
    anomalies: List[str] = Field(default_factory=list)
    fault_classes: List[str] = Field(default_factory=list)
    tokens: int = 0


class HistogramRow(BaseModel):
    repair_count: int
    passed: int = 0
    failed: int = 0


class BenchReport(BaseModel):
    label: str = ""
    ttc: int
    nrc: int
    tra: int
    passed: int
    failed: int
    rsr: MetricValue
    anr: MetricValue
    histogram: List[HistogramRow] = Field(default_factory=list)
    per_case: List[CaseSummary] = Field(default_factory=list)
    tokens: int = 0


    @property
    def rsr_ratio(self) -> Ratio:
        return compute_rsr(self.nrc, self.ttc)


    @property
    def anr_ratio(self) -> Ratio:
        return compute_anr(self.tra, self.nrc)


def aggregate(summaries: Iterable[CaseSummary], label: str = "") -> BenchReport:
    """Fold per-case outcomes into a report; independent of input order."""
    cases = sorted(summaries, key=lambda s: s.case_id)
    nrc = tra = passed = 0
    histogram: Dict[int, HistogramRow] = {}
    for case in cases:
        row = histogram.setdefault(case.repair_count, HistogramRow(repair_count=case.repair_count))
        if case.passed:
            passed += 1
            row.passed += 1
            if case.repair_count >= 1:
                nrc += 1
                tra += case.repair_count
        else:
            row.failed += 1

    ttc = len(cases)
    rsr = compute_rsr(nrc, ttc)
    anr = compute_anr(tra, nrc)
    return BenchReport(
        label=label,
        ttc=ttc,
        nrc=nrc,
        tra=tra,
        passed=passed,
        failed=ttc - passed,
        rsr=MetricValue.of(rsr, percent_display(rsr)),
        anr=MetricValue.of(anr, ratio_display(anr)),
        histogram=[histogram[k] for k in sorted(histogram)],
        per_case=cases,
        tokens=sum(c.tokens for c in cases),
    )


class ClassBreakdown(BaseModel):
    fault_class: str
    cases: int = 0
    passed: int = 0
    nrc: int = 0
    tra: int = 0


    @property
    def anr(self) -> Ratio:
        return compute_anr(self.tra, self.nrc)


def summarize(report: BenchReport) -> List[ClassBreakdown]:
    """Outcome breakdown per injected fault class; multi-fault cases count under each of their classes."""
    rows: Dict[str, ClassBreakdown] = {}
    for case in report.per_case:
        for fault_class in case.fault_classes or ["none"]:
            row = rows.setdefault(fault_class, ClassBreakdown(fault_class=fault_class))
            row.cases += 1
            if case.passed:
                row.passed += 1
                if case.repair_count >= 1:
                    row.nrc += 1
                    row.tra += case.repair_count
    return [rows[k] for k in sorted(rows)]


class CombinedSummary(BaseModel):
    labels: List[str]
    model_weighted_rsr: MetricValue
    model_weighted_anr: MetricValue
    case_weighted_rsr: MetricValue
    case_weighted_anr: MetricValue


def _mean(values: Sequence[Ratio]) -> Ratio:
    if not values or any(v is UNDEFINED for v in values):
        return UNDEFINED
    return sum(values, Fraction(0)) / len(values)


def combine(reports: Sequence[BenchReport]) -> CombinedSummary:
    """Cross-advisor summary, weighted per model and per case."""
    model_rsr = _mean([r.rsr_ratio for r in reports])
    model_anr = _mean([r.anr_ratio for r in reports])
    case_rsr = compute_rsr(sum(r.nrc for r in reports), sum(r.ttc for r in reports))
    case_anr = compute_anr(sum(r.tra for r in reports), sum(r.nrc for r in reports))
    return CombinedSummary(
        labels=[r.label for r in reports],
        model_weighted_rsr=MetricValue.of(model_rsr, percent_display(model_rsr)),
        model_weighted_anr=MetricValue.of(model_anr, ratio_display(model_anr)),
        case_weighted_rsr=MetricValue.of(case_rsr, percent_display(case_rsr)),
        case_weighted_anr=MetricValue.of(case_anr, ratio_display(case_anr)),
    )
