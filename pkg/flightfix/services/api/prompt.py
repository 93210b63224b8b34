from functools import lru_cache
from pathlib import Path
from typing import Dict, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field

from flightfix.services.anomaly.detectors import AnomalyType
from flightfix.services.paramdb import ParamRegistry


TEMPLATE_PATH = Path(__file__).resolve().parents[2] / "data" / "prompt_template.txt"

ERROR_TYPE_SLOT = "{error_type}"
PARAM_INFO_SLOT = "{param_info_str}"


class RepairPrompt(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    anomaly: AnomalyType
    params_snapshot: Dict[str, float] = Field(default_factory=dict)


@lru_cache(maxsize=8)
def load_template(path: Optional[Path] = None) -> str:
    text = Path(path or TEMPLATE_PATH).read_text(encoding="utf-8")
    for slot in (ERROR_TYPE_SLOT, PARAM_INFO_SLOT):
        if text.count(slot) != 1:
            raise ValueError(f"prompt template must contain {slot} exactly once")
    return text


def build_prompt(
    anomaly: AnomalyType,
    current: Mapping[str, float],
    registry: ParamRegistry,
    include_constraints: bool = True,
    template: Optional[str] = None,
) -> RepairPrompt:
    template = template if template is not None else load_template()
    param_info = registry.render_param_info(current, include_constraints=include_constraints)
    # slot-by-slot replace: the template carries literal JSON braces
    text = template.replace(ERROR_TYPE_SLOT, anomaly.label).replace(PARAM_INFO_SLOT, param_info)
    return RepairPrompt(text=text, anomaly=anomaly, params_snapshot=dict(current))
