import logging
import os
import time
from datetime import datetime, timezone
from typing import Dict, Literal, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from flightfix.services.anomaly.detectors import AnomalyType
from flightfix.services.api.base import AdvisorBackend, AdvisorError, CompletionResult, ConfigError
from flightfix.services.api.mock import MockBackend, MockMode
from flightfix.services.api.parser import RepairAdvice, parse_response
from flightfix.services.api.prompt import RepairPrompt, build_prompt
from flightfix.services.api.remote import RemoteBackend
from flightfix.services.paramdb import ParamRegistry
from flightfix.services.simdrone.faults import FaultModel


logger = logging.getLogger(__name__)


class AdvisorConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    backend: Literal["mock", "remote"] = "mock"
    mock_mode: MockMode = MockMode.OPTIMAL
    endpoint: Optional[str] = None
    model_name: str = "mock"
    api_key_env: Optional[str] = None
    timeout: float = Field(30.0, gt=0)
    max_retries: int = Field(2, ge=0)
    backoff_base: float = Field(1.0, ge=0)
    temperature: float = Field(0.0, ge=0)
    max_tokens: int = Field(600, ge=1)
    strict_advice: bool = False
    include_constraints: bool = True


    @model_validator(mode="after")
    def _remote_needs_endpoint(self) -> "AdvisorConfig":
        if self.backend == "remote" and (not self.endpoint or not self.api_key_env):
            raise ValueError("remote advisor requires endpoint and api_key_env")
        return self


    @property
    def label(self) -> str:
        if self.backend == "mock":
            return f"mock-{self.mock_mode.value}"
        return self.model_name


class AuditEntry(BaseModel):
    anomaly: AnomalyType
    timestamp: str
    prompt: str
    raw: Optional[str] = None
    updates: Dict[str, float] = Field(default_factory=dict)
    rationale: str = ""
    error: Optional[str] = None
    usage: Dict[str, int] = Field(default_factory=dict)
    attempts: int = 0
    latency_s: float = 0.0


def make_backend(config: AdvisorConfig, registry: ParamRegistry, fault_model: FaultModel) -> AdvisorBackend:
    if config.backend == "mock":
        return MockBackend(registry, config.mock_mode, fault_model)

    api_key = os.environ.get(config.api_key_env or "")
    if not api_key:
        raise ConfigError(f"environment variable {config.api_key_env} is not set")
    return RemoteBackend(
        endpoint=config.endpoint,
        model_name=config.model_name,
        api_key=api_key,
        timeout=config.timeout,
        max_retries=config.max_retries,
        backoff_base=config.backoff_base,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
    )


async def query(backend: AdvisorBackend, prompt: RepairPrompt) -> CompletionResult:
    return await backend.complete(prompt)


class Advisor:
    """Prompt -> completion -> sanitized advice, one call per repair attempt.

    Stateless per request, so one instance serves concurrent missions.
    """


    def __init__(self, config: AdvisorConfig, registry: ParamRegistry, backend: AdvisorBackend):
        self.config = config
        self.registry = registry
        self.backend = backend


    @classmethod
    def from_config(cls, config: AdvisorConfig, registry: ParamRegistry, fault_model: FaultModel) -> "Advisor":
        return cls(config, registry, make_backend(config, registry, fault_model))


    async def get_fix(self, anomaly: AnomalyType, current: Mapping[str, float]) -> Tuple[RepairAdvice, AuditEntry]:
        prompt = build_prompt(anomaly, current, self.registry, include_constraints=self.config.include_constraints)
        timestamp = datetime.now(timezone.utc).isoformat()
        started = time.monotonic()
        completion: Optional[CompletionResult] = None
        error: Optional[str] = None
        try:
            completion = await query(self.backend, prompt)
            advice = parse_response(completion.text, self.registry, strict=self.config.strict_advice)
            logger.info("Advice for %s: %s", anomaly.value, advice.updates)
        except AdvisorError as e:
            error = f"{type(e).__name__}: {e}"
            logger.warning("Advisor attempt for %s failed: %s", anomaly.value, error)
            advice = RepairAdvice.empty(rationale=error)

        audit = AuditEntry(
            anomaly=anomaly,
            timestamp=timestamp,
            prompt=prompt.text,
            raw=completion.text if completion else None,
            updates=advice.updates,
            rationale=advice.rationale,
            error=error,
            usage=completion.usage if completion else {},
            attempts=completion.attempts if completion else 0,
            latency_s=round(time.monotonic() - started, 6),
        )
        return advice, audit


    async def close(self) -> None:
        await self.backend.close()


    async def __aenter__(self):
        return self


    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.close()
