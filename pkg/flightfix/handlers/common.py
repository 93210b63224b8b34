import json
import secrets
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from flightfix import __version__
from flightfix.config import HarnessConfig
from flightfix.loader import build_fault_model, load_config, load_harness_registry
from flightfix.services.api.base import ConfigError
from flightfix.services.bench.suite import SUITE_PLANS
from flightfix.services.paramdb import ParamRegistry, ParamSet, SchemaError
from flightfix.services.simdrone.faults import FaultModel
from flightfix.services.telemetry.models import MissionPlan
from flightfix.utils.logs import setup_logging


EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

# anything that means "your inputs are wrong" rather than "the mission failed"
INPUT_ERRORS = (OSError, ValueError, ConfigError)


@dataclass
class Context:
    config: HarnessConfig
    registry: ParamRegistry
    fault_model: FaultModel
    config_path: Optional[str] = None


def load_context(args) -> Context:
    config = load_config(
        args.config,
        advisor=getattr(args, "advisor", None),
        output_dir=getattr(args, "output_dir", None),
        link=getattr(args, "link", None),
        log_level=getattr(args, "log_level", None),
        realtime=True if getattr(args, "realtime", False) else None,
    )
    setup_logging(config.log_level)
    registry = load_harness_registry(config)
    return Context(config, registry, build_fault_model(config, registry), args.config)


def describe_error(e: BaseException) -> str:
    if isinstance(e, ValidationError):
        first = e.errors()[0]
        where = ".".join(map(str, first["loc"])) or "config"
        return f"invalid configuration at {where}: {first['msg']}"
    if isinstance(e, FileNotFoundError):
        return f"file not found: {e.filename}"
    return str(e)


def fail(e: BaseException) -> int:
    print(f"error: {describe_error(e)}", file=sys.stderr)
    return EXIT_USAGE


def new_run_dir(output_dir: Path) -> Path:
    """output_dir/<timestamp>-<suffix>/, never reusing an existing directory."""
    output_dir.mkdir(parents=True, exist_ok=True)
    while True:
        run_id = f"{datetime.now():%Y%m%d-%H%M%S}-{secrets.token_hex(3)}"
        run_dir = output_dir / run_id
        try:
            run_dir.mkdir()
            return run_dir
        except FileExistsError:
            continue


def write_manifest(run_dir: Path, command: str, config: HarnessConfig, extra: Optional[Dict[str, Any]] = None) -> Path:
    manifest = {
        "run_id": run_dir.name,
        "command": command,
        "version": __version__,
        "started_at": datetime.now(timezone.utc).isoformat(),
        "advisor": config.advisor.label,
        "link": config.link,
        "config": config.model_dump(mode="json"),
        **(extra or {}),
    }
    path = run_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def load_params_file(source: str, registry: ParamRegistry) -> ParamSet:
    """A JSON object of name -> value; names not given keep their defaults."""
    path = Path(source)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(raw, dict) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw.values()):
        raise SchemaError(f"{path}: expected a JSON object of parameter name -> number")
    params = {name: float(value) for name, value in raw.items()}
    registry.require_valid(params)
    return params


def load_plan(value: Optional[str]) -> MissionPlan:
    """A shipped plan name (square, survey) or a JSON file holding a MissionPlan."""
    if value is None:
        return SUITE_PLANS["square"]
    if value in SUITE_PLANS:
        return SUITE_PLANS[value]
    path = Path(value)
    try:
        return MissionPlan.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise SchemaError(f"{path}: invalid mission plan: {e.errors()[0]['msg']}") from e


def log_to_run_dir(ctx: Context, run_dir: Path) -> None:
    setup_logging(ctx.config.log_level, log_file=run_dir / "harness.log")
