import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from flightfix.config import DEFAULT_CONFIG_PATH, HarnessConfig, resolve_path
from flightfix.services.api.advisor import Advisor
from flightfix.services.paramdb import ParamRegistry, SchemaError, load_registry
from flightfix.services.simdrone.faults import FaultModel
from flightfix.services.simdrone.link import SimLink
from flightfix.services.simdrone.model import StepHook
from flightfix.services.telemetry.link import VehicleLink
from flightfix.services.telemetry.wire import WireLink


logger = logging.getLogger(__name__)

ADVISOR_CHOICES = ("mock-optimal", "mock-partial", "mock-noop", "remote")


def _read_config_file(path: Path) -> Dict[str, Any]:
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    return raw


def _apply_advisor_choice(raw: Dict[str, Any], choice: str) -> None:
    if choice not in ADVISOR_CHOICES:
        raise SchemaError(f"unknown advisor {choice!r}, expected one of {', '.join(ADVISOR_CHOICES)}")
    section = dict(raw.get("advisor") or {})
    if choice == "remote":
        section["backend"] = "remote"
    else:
        section["backend"] = "mock"
        section["mock_mode"] = choice.removeprefix("mock-")
    raw["advisor"] = section


def load_config(
    source: Optional[Path | str] = None,
    *,
    advisor: Optional[str] = None,
    output_dir: Optional[str] = None,
    link: Optional[str] = None,
    log_level: Optional[str] = None,
    realtime: Optional[bool] = None,
) -> HarnessConfig:
    """Flags > file > defaults. Raises OSError, SchemaError or pydantic.ValidationError."""
    path = Path(source) if source else DEFAULT_CONFIG_PATH
    raw = _read_config_file(path)

    if "registry_path" in raw:
        raw["registry_path"] = resolve_path(raw["registry_path"], path.parent)
    if advisor is not None:
        _apply_advisor_choice(raw, advisor)
    if output_dir is not None:
        raw["output_dir"] = output_dir
    if link is not None:
        raw["link"] = link
    if log_level is not None:
        raw["log_level"] = log_level
    if realtime is not None:
        raw["sim"] = {**(raw.get("sim") or {}), "realtime": realtime}

    config = HarnessConfig.model_validate(raw)
    # the vehicle's own timeout mirrors the orchestrator's
    sim = config.sim.model_copy(update={"mission_timeout": config.orchestrator.mission_timeout})
    config = config.model_copy(update={"sim": sim})
    logger.debug("Loaded config from %s (advisor %s, link %s)", path, config.advisor.label, config.link)
    return config


def load_harness_registry(config: HarnessConfig) -> ParamRegistry:
    return load_registry(config.registry_path)


def build_fault_model(config: HarnessConfig, registry: ParamRegistry) -> FaultModel:
    return FaultModel(config.sim.fault_table, registry)


def build_advisor(config: HarnessConfig, registry: ParamRegistry, fault_model: FaultModel) -> Advisor:
    return Advisor.from_config(config.advisor, registry, fault_model)


def spawn_argv(config_path: Optional[Path | str] = None, log_level: Optional[str] = None) -> list:
    argv = [sys.executable, "-m", "flightfix.services.simdrone.server"]
    if config_path is not None:
        argv += ["--config", str(config_path)]
    if log_level is not None:
        argv += ["--log-level", log_level]
    return argv


def build_link_factory(
    config: HarnessConfig,
    registry: ParamRegistry,
    fault_model: FaultModel,
    config_path: Optional[Path | str] = None,
    on_step: Optional[StepHook] = None,
) -> Callable[[], VehicleLink]:
    """A fresh link per mission: in-process simulator, TCP vehicle or spawned simulator process."""
    if config.link == "sim":
        return lambda: SimLink(registry, config.sim, fault_model, on_step)
    if config.link == "spawn":
        argv = spawn_argv(config_path, config.log_level)
        return lambda: WireLink(registry, argv=argv, realtime=config.sim.realtime)
    # fail fast on a malformed url
    WireLink.from_url(registry, config.link)
    return lambda: WireLink.from_url(registry, config.link, realtime=config.sim.realtime)
