from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from flightfix.services.anomaly.detectors import DetectorConfig
from flightfix.services.api.advisor import AdvisorConfig
from flightfix.services.repair import OrchestratorConfig
from flightfix.services.simdrone.model import SimConfig


DATA_DIR = Path(__file__).resolve().parent / "data"
DEFAULT_CONFIG_PATH = DATA_DIR / "config.json"
DEFAULT_REGISTRY_PATH = DATA_DIR / "params.json"
DEFAULT_SUITE_PATH = DATA_DIR / "suite.jsonl"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class HarnessConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    registry_path: Path = DEFAULT_REGISTRY_PATH
    detector: DetectorConfig = Field(default_factory=DetectorConfig)
    orchestrator: OrchestratorConfig = Field(default_factory=OrchestratorConfig)
    advisor: AdvisorConfig = Field(default_factory=AdvisorConfig)
    sim: SimConfig = Field(default_factory=SimConfig)
    output_dir: Path = Path("runs")
    # sim | spawn | tcp://host:port
    link: str = "sim"
    log_level: str = "INFO"


    @field_validator("link")
    @classmethod
    def _known_link(cls, value: str) -> str:
        if value not in ("sim", "spawn") and not value.startswith("tcp://"):
            raise ValueError(f"link must be sim, spawn or tcp://host:port, got {value!r}")
        return value


    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"log_level must be one of {', '.join(LOG_LEVELS)}")
        return level


    @field_validator("output_dir")
    @classmethod
    def _creatable(cls, value: Path) -> Path:
        existing = next((p for p in (value, *value.parents) if p.exists()), None)
        if existing is not None and not existing.is_dir():
            raise ValueError(f"output_dir {value} is blocked by the file {existing}")
        return value


def resolve_path(value: Optional[str], base: Path) -> Optional[Path]:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else base / path
