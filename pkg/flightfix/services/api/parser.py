import json
import logging
import math
import re
from typing import Any, Dict, Iterator, Optional

from pydantic import BaseModel, ConfigDict, Field

from flightfix.services.api.base import AdviceRejected, ParseError
from flightfix.services.paramdb import ParamRegistry, format_value


logger = logging.getLogger(__name__)

_TRAILING_COMMA = re.compile(r",\s*([}\]])")
_STRING_OR_COMMENT = re.compile(r'"(?:\\.|[^"\\])*"|//[^\n]*|/\*[\s\S]*?\*/')


class RepairAdvice(BaseModel):
    model_config = ConfigDict(frozen=True)

    updates: Dict[str, float] = Field(default_factory=dict)
    rationale: str = ""


    @classmethod
    def empty(cls, rationale: str = "") -> "RepairAdvice":
        """Placeholder for an attempt that produced no usable advice."""
        return cls(updates={}, rationale=rationale)


    @property
    def is_empty(self) -> bool:
        return not self.updates


def _balanced_objects(text: str) -> Iterator[str]:
    """Yields each top-level brace-balanced span, string literals respected.

    Spans are never re-entered, so an object nested in a span that fails to
    parse is not offered on its own. An unterminated span ends the scan.
    """
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        end = None
        for i in range(start, len(text)):
            char = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif char == "\\":
                    escaped = True
                elif char == '"':
                    in_string = False
                continue
            if char == '"':
                in_string = True
            elif char == "{":
                depth += 1
            elif char == "}":
                depth -= 1
                if depth == 0:
                    end = i
                    break
        if end is None:
            return
        yield text[start:end + 1]
        start = text.find("{", end + 1)


def _strip_comments(text: str) -> str:
    return _STRING_OR_COMMENT.sub(lambda m: m.group(0) if m.group(0).startswith('"') else "", text)


def _load_object(candidate: str) -> Optional[Any]:
    relaxed = _TRAILING_COMMA.sub(r"\1", _strip_comments(candidate))
    attempts = [candidate, relaxed]
    if '"' not in relaxed:
        attempts.append(relaxed.replace("'", '"'))
    for attempt in attempts:
        try:
            return json.loads(attempt)
        except json.JSONDecodeError:
            continue
    return None


def _find_advice(value: Any) -> Optional[Dict[str, Any]]:
    if not isinstance(value, dict):
        return None
    if "parameters" in value:
        return value
    for inner in value.values():
        found = _find_advice(inner)
        if found is not None:
            return found
    return None


def extract_json_object(raw: str) -> Dict[str, Any]:
    """The first object carrying ``parameters``, else the first object at all."""
    first: Optional[Dict[str, Any]] = None
    for candidate in _balanced_objects(raw):
        value = _load_object(candidate)
        if not isinstance(value, dict):
            continue
        advice = _find_advice(value)
        if advice is not None:
            return advice
        if first is None:
            first = value
    if first is not None:
        return first
    raise ParseError("no JSON object found in advisor response")


def _as_number(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return None
    return None


def parse_response(raw: str, registry: ParamRegistry, strict: bool = False) -> RepairAdvice:
    data = extract_json_object(raw)
    entries = data.get("parameters")
    if not isinstance(entries, list) or not entries:
        raise AdviceRejected("advice has no 'parameters' list")

    updates: Dict[str, float] = {}
    for entry in entries:
        if not isinstance(entry, dict) or not isinstance(entry.get("name"), str):
            logger.warning("Skipping malformed advice entry %r", entry)
            continue
        name = entry["name"]
        value = _as_number(entry.get("value"))
        if value is None or not math.isfinite(value):
            logger.warning("Skipping %s: value %r is not a finite number", name, entry.get("value"))
            continue
        if name not in registry:
            logger.warning("Dropping unknown parameter %s from advice", name)
            continue

        spec = registry.spec(name)
        if strict and not spec.contains(value):
            raise AdviceRejected(f"{name}={format_value(value)} outside [{format_value(spec.min)}, {format_value(spec.max)}]")
        sanitized = spec.quantize(value)
        if sanitized != value:
            logger.info("Advised %s=%s sanitized to %s", name, format_value(value), format_value(sanitized))
        updates[name] = sanitized

    if not updates:
        raise AdviceRejected("advice names no known parameter")

    reasoning = data.get("reasoning")
    return RepairAdvice(updates=updates, rationale=reasoning if isinstance(reasoning, str) else "")
