import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator


logger = logging.getLogger(__name__)

ParamSet = Dict[str, float]

_RANGE_TOLERANCE = 1e-9


class SchemaError(ValueError):
    pass


class ParamValidationError(ValueError):
    def __init__(self, violations: List["Violation"]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class Violation:
    name: str
    kind: str  # unknown | out_of_range | not_finite
    value: float


    def __str__(self) -> str:
        return f"{self.name}={self.value!r}: {self.kind.replace('_', ' ')}"


class ParamSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(min_length=1)
    min: float
    max: float
    step: float
    default: float
    description: str = ""


    @model_validator(mode="after")
    def _check_bounds(self) -> "ParamSpec":
        if self.min > self.max:
            raise ValueError(f"inverted range: min {self.min} > max {self.max}")
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not self.min <= self.default <= self.max:
            raise ValueError(f"default {self.default} outside [{self.min}, {self.max}]")
        return self


    @property
    def span(self) -> float:
        return self.max - self.min


    def contains(self, value: float) -> bool:
        return self.min - _RANGE_TOLERANCE <= value <= self.max + _RANGE_TOLERANCE


    def quantize(self, value: float) -> float:
        """Clamp into [min, max], then snap to min + k*step (ties away from zero)."""
        clamped = min(max(float(value), self.min), self.max)
        steps = math.floor((clamped - self.min) / self.step + 0.5)
        snapped = round(self.min + steps * self.step, 12)
        return min(snapped, self.max)


def format_value(value: float) -> str:
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


class ParamRegistry:
    """Immutable name -> ParamSpec lookup, safe to share between missions."""


    def __init__(self, specs: List[ParamSpec]):
        self._specs: Dict[str, ParamSpec] = {}
        for spec in specs:
            if spec.name in self._specs:
                raise SchemaError(f"duplicate parameter name: {spec.name}")
            self._specs[spec.name] = spec


    def __contains__(self, name: object) -> bool:
        return name in self._specs


    def __len__(self) -> int:
        return len(self._specs)


    def __iter__(self) -> Iterator[ParamSpec]:
        return iter(self._specs[name] for name in self.names)


    @property
    def names(self) -> List[str]:
        return sorted(self._specs)


    def spec(self, name: str) -> ParamSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise ParamValidationError([Violation(name, "unknown", float("nan"))]) from None


    def defaults(self) -> ParamSet:
        return {name: self._specs[name].default for name in self.names}


    def validate(self, params: Mapping[str, float]) -> List[Violation]:
        violations = []
        for name in sorted(params):
            value = params[name]
            spec = self._specs.get(name)
            if spec is None:
                violations.append(Violation(name, "unknown", value))
            elif not math.isfinite(value):
                violations.append(Violation(name, "not_finite", value))
            elif not spec.contains(value):
                violations.append(Violation(name, "out_of_range", value))
        return violations


    def require_valid(self, params: Mapping[str, float]) -> None:
        violations = self.validate(params)
        if violations:
            raise ParamValidationError(violations)


    def clamp_and_quantize(self, params: Mapping[str, float]) -> ParamSet:
        unknown = [Violation(name, "unknown", value) for name, value in params.items() if name not in self._specs]
        if unknown:
            raise ParamValidationError(unknown)
        return {name: self._specs[name].quantize(value) for name, value in params.items()}


    def render_param_info(self, current: Mapping[str, float], include_constraints: bool = True) -> str:
        lines = []
        for name in sorted(current):
            spec = self.spec(name)
            value = format_value(current[name])
            if include_constraints:
                lines.append(
                    f"{name}: range=[{format_value(spec.min)},{format_value(spec.max)}], "
                    f"step={format_value(spec.step)}, current={value}"
                )
            else:
                lines.append(f"{name}: current={value}")
        return "\n".join(lines)


def load_registry(source: Path | str) -> ParamRegistry:
    path = Path(source)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        logger.info("Registry %s is empty", path)
        return ParamRegistry([])

    try:
        entries = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(entries, list):
        raise SchemaError(f"{path}: expected a JSON array of parameter specs")

    specs = []
    for index, entry in enumerate(entries):
        label = entry.get("name", f"#{index}") if isinstance(entry, dict) else f"#{index}"
        try:
            specs.append(ParamSpec.model_validate(entry))
        except ValidationError as e:
            reason = "; ".join(err["msg"] for err in e.errors())
            raise SchemaError(f"{path}: entry {label}: {reason}") from e

    registry = ParamRegistry(specs)
    logger.debug("Loaded %d parameter specs from %s", len(registry), path)
    return registry

