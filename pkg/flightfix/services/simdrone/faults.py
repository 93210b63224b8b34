import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional

from pydantic import BaseModel, ConfigDict

from flightfix.services.anomaly.detectors import AnomalyType
from flightfix.services.paramdb import ParamRegistry, ParamSpec, SchemaError


logger = logging.getLogger(__name__)

# a parameter a quarter of its range away from optimal sits at the onset of its fault
SEVERITY_SCALE = 0.25


class FaultClass(str, Enum):
    DEVIATION = "deviation"
    THRUST = "thrust"
    TIMEOUT = "timeout"
    CRASH = "crash"


    @property
    def anomaly(self) -> AnomalyType:
        return _ANOMALY_FOR_CLASS[self]


    @classmethod
    def for_anomaly(cls, anomaly: AnomalyType) -> "FaultClass":
        for fault_class, kind in _ANOMALY_FOR_CLASS.items():
            if kind is anomaly:
                return fault_class
        raise ValueError(anomaly)


_ANOMALY_FOR_CLASS = {
    FaultClass.DEVIATION: AnomalyType.DEVIATION,
    FaultClass.THRUST: AnomalyType.THRUST_LOSS,
    FaultClass.TIMEOUT: AnomalyType.TIMEOUT,
    FaultClass.CRASH: AnomalyType.CRASH,
}


class FaultEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    optimal: float
    fault_class: FaultClass


DEFAULT_FAULT_TABLE: Dict[str, FaultEntry] = {
    "ATC_RAT_RLL_P": FaultEntry(optimal=0.135, fault_class=FaultClass.DEVIATION),
    "ATC_RAT_PIT_P": FaultEntry(optimal=0.135, fault_class=FaultClass.DEVIATION),
    "MOT_THST_EXPO": FaultEntry(optimal=0.65, fault_class=FaultClass.THRUST),
    "MOT_THST_HOVER": FaultEntry(optimal=0.25, fault_class=FaultClass.THRUST),
    "PSC_VELXY_P": FaultEntry(optimal=2.0, fault_class=FaultClass.TIMEOUT),
    "WPNAV_ACCEL": FaultEntry(optimal=100.0, fault_class=FaultClass.TIMEOUT),
    "PSC_ACCZ_P": FaultEntry(optimal=0.3, fault_class=FaultClass.CRASH),
    "PSC_POSZ_P": FaultEntry(optimal=1.0, fault_class=FaultClass.CRASH),
}


def severity(value: float, spec: ParamSpec, optimal: float) -> float:
    quarter = SEVERITY_SCALE * spec.span
    if quarter <= 0:
        return 0.0
    return abs(value - optimal) / quarter


@dataclass(frozen=True)
class Risk:
    name: str
    fault_class: FaultClass
    severity: float


class FaultModel:
    """The simulator's fault table bound to a parameter registry."""


    def __init__(self, table: Mapping[str, FaultEntry], registry: ParamRegistry):
        missing = sorted(name for name in table if name not in registry)
        if missing:
            raise SchemaError(f"fault table names unknown parameters: {', '.join(missing)}")
        self.table = dict(table)
        self.registry = registry


    def linked_params(self, fault_class: FaultClass) -> List[str]:
        return sorted(name for name, entry in self.table.items() if entry.fault_class is fault_class)


    def optimal_values(self, fault_class: FaultClass) -> Dict[str, float]:
        return {name: self.table[name].optimal for name in self.linked_params(fault_class)}


    def param_severity(self, name: str, value: float) -> float:
        entry = self.table[name]
        return severity(value, self.registry.spec(name), entry.optimal)


    def class_severity(self, params: Mapping[str, float], fault_class: FaultClass) -> float:
        worst = 0.0
        for name in self.linked_params(fault_class):
            if name in params:
                worst = max(worst, self.param_severity(name, params[name]))
        return worst


    def severities(self, params: Mapping[str, float]) -> Dict[FaultClass, float]:
        return {fault_class: self.class_severity(params, fault_class) for fault_class in FaultClass}


    def risks(self, params: Mapping[str, float], threshold: float = 1.0) -> List[Risk]:
        found = []
        for name in sorted(params):
            if name not in self.table:
                continue
            value = self.param_severity(name, params[name])
            if value >= threshold:
                found.append(Risk(name, self.table[name].fault_class, value))
        return found


def default_fault_model(registry: ParamRegistry, table: Optional[Mapping[str, FaultEntry]] = None) -> FaultModel:
    return FaultModel(table if table is not None else DEFAULT_FAULT_TABLE, registry)
