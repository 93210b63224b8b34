from abc import ABC, abstractmethod
from typing import Dict

from pydantic import BaseModel, ConfigDict, Field

from flightfix.services.api.prompt import RepairPrompt


class AdvisorError(Exception):
    pass


class ConfigError(AdvisorError):
    pass


class AdvisorUnavailable(AdvisorError):
    pass


class ParseError(AdvisorError):
    pass


class AdviceRejected(AdvisorError):
    pass


class CompletionResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    usage: Dict[str, int] = Field(default_factory=dict)
    attempts: int = 1


class AdvisorBackend(ABC):
    @abstractmethod
    async def complete(self, prompt: RepairPrompt) -> CompletionResult:
        ...


    async def close(self) -> None:
        pass
