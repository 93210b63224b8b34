import json
import logging
from enum import Enum
from typing import Dict, Mapping

from flightfix.services.anomaly.detectors import AnomalyType
from flightfix.services.api.base import AdvisorBackend, CompletionResult
from flightfix.services.api.prompt import RepairPrompt
from flightfix.services.paramdb import ParamRegistry
from flightfix.services.simdrone.faults import FaultClass, FaultModel


logger = logging.getLogger(__name__)


class MockMode(str, Enum):
    OPTIMAL = "optimal"
    PARTIAL = "partial"
    NOOP = "noop"


def mock_oracle(
    anomaly: AnomalyType,
    current: Mapping[str, float],
    registry: ParamRegistry,
    mode: MockMode,
    fault_model: FaultModel,
) -> str:
    """Advice JSON in the response schema, computed from the simulator's fault table."""
    updates: Dict[str, float] = {}
    if mode is MockMode.NOOP:
        updates = {name: current[name] for name in sorted(current)}
        reasoning = "Configuration left unchanged."
    else:
        fault_class = FaultClass.for_anomaly(anomaly)
        for name, optimal in fault_model.optimal_values(fault_class).items():
            if name not in registry:
                continue
            value = current.get(name, registry.spec(name).default)
            if mode is MockMode.OPTIMAL:
                updates[name] = optimal
            else:
                updates[name] = registry.spec(name).quantize(value + (optimal - value) / 2.0)
        reasoning = f"Restore {fault_class.value}-related parameters toward their tuned values."

    body = {
        "parameters": [{"name": name, "value": value} for name, value in updates.items()],
        "reasoning": reasoning,
    }
    return json.dumps(body)


class MockBackend(AdvisorBackend):
    def __init__(self, registry: ParamRegistry, mode: MockMode, fault_model: FaultModel):
        self.registry = registry
        self.mode = mode
        self.fault_model = fault_model


    async def complete(self, prompt: RepairPrompt) -> CompletionResult:
        text = mock_oracle(prompt.anomaly, prompt.params_snapshot, self.registry, self.mode, self.fault_model)
        logger.debug("Mock oracle (%s) answered for %s", self.mode.value, prompt.anomaly.value)
        return CompletionResult(text=text)
