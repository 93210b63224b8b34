import json
import math

import numpy as np
import pytest

from flightfix.config import DEFAULT_REGISTRY_PATH
from flightfix.services.paramdb import (
    ParamRegistry,
    ParamSpec,
    ParamValidationError,
    SchemaError,
    format_value,
    load_registry,
)


@pytest.fixture(scope="module")
def registry():
    return load_registry(DEFAULT_REGISTRY_PATH)


def test_shipped_registry_loads(registry):
    assert len(registry) == 20
    assert "ATC_RAT_RLL_P" in registry
    assert "NOT_A_PARAM" not in registry
    assert registry.names == sorted(registry.names)
    assert registry.defaults()["PSC_VELXY_P"] == 2.0


def test_validate_reports_each_violation(registry):
    violations = registry.validate({"ATC_RAT_RLL_P": 0.9, "BOGUS": 1.0, "PSC_POSZ_P": math.nan})
    kinds = {v.name: v.kind for v in violations}
    assert kinds == {"ATC_RAT_RLL_P": "out_of_range", "BOGUS": "unknown", "PSC_POSZ_P": "not_finite"}


def test_validate_accepts_bounds_inclusive(registry):
    assert registry.validate({"ATC_RAT_RLL_P": 0.01, "PSC_VELXY_P": 6.0}) == []


def test_require_valid_raises(registry):
    with pytest.raises(ParamValidationError) as exc:
        registry.require_valid({"WPNAV_ACCEL": 10.0})
    assert exc.value.violations[0].kind == "out_of_range"


def test_unknown_spec_lookup_raises(registry):
    with pytest.raises(ParamValidationError):
        registry.spec("NOPE")
    with pytest.raises(ParamValidationError):
        registry.clamp_and_quantize({"NOPE": 1.0})


@pytest.mark.parametrize(
    "value, expected",
    [
        (0.1371, 0.135),
        (0.9, 0.5),
        (-3.0, 0.01),
        (0.44, 0.44),
    ],
)
def test_quantize_clamps_and_snaps(registry, value, expected):
    assert registry.spec("ATC_RAT_RLL_P").quantize(value) == pytest.approx(expected, abs=1e-12)


def test_quantize_is_idempotent_and_in_range(registry):
    rng = np.random.default_rng(7)
    for spec in registry:
        for value in rng.uniform(spec.min - spec.span, spec.max + spec.span, size=25):
            once = spec.quantize(value)
            assert spec.contains(once)
            assert spec.quantize(once) == once


def test_clamp_and_quantize_whole_set(registry):
    fixed = registry.clamp_and_quantize({"WPNAV_ACCEL": 104.0, "MOT_THST_HOVER": 0.9})
    assert fixed == {"WPNAV_ACCEL": 100.0, "MOT_THST_HOVER": 0.6875}


def test_format_value():
    assert format_value(100.0) == "100"
    assert format_value(0.135) == "0.135"
    assert format_value(-0.1) == "-0.1"


def test_render_param_info(registry):
    current = {"PSC_VELXY_P": 2.0, "ATC_RAT_RLL_P": 0.135}
    assert registry.render_param_info(current) == (
        "ATC_RAT_RLL_P: range=[0.01,0.5], step=0.005, current=0.135\n"
        "PSC_VELXY_P: range=[0.1,6], step=0.1, current=2"
    )
    assert registry.render_param_info(current, include_constraints=False) == (
        "ATC_RAT_RLL_P: current=0.135\nPSC_VELXY_P: current=2"
    )


def test_spec_rejects_inverted_range():
    with pytest.raises(ValueError):
        ParamSpec(name="X", min=2.0, max=1.0, step=0.1, default=1.5)


def test_registry_rejects_duplicates():
    spec = ParamSpec(name="X", min=0.0, max=1.0, step=0.1, default=0.5)
    with pytest.raises(SchemaError):
        ParamRegistry([spec, spec])


def test_load_registry_errors(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    with pytest.raises(SchemaError):
        load_registry(bad_json)

    inverted = tmp_path / "inverted.json"
    inverted.write_text(json.dumps([{"name": "X", "min": 1.0, "max": 0.0, "step": 0.1, "default": 0.5}]))
    with pytest.raises(SchemaError, match="X"):
        load_registry(inverted)

    not_list = tmp_path / "obj.json"
    not_list.write_text(json.dumps({"name": "X"}))
    with pytest.raises(SchemaError):
        load_registry(not_list)


def test_load_empty_registry(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("")
    registry = load_registry(empty)
    assert len(registry) == 0
    assert registry.defaults() == {}
