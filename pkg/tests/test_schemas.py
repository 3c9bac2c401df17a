import json

import numpy as np
import pytest
from pydantic import ValidationError

from haar_fluctuations.model import ModelKind
from haar_fluctuations.schemas import (
    ExperimentBlock,
    ModelBlock,
    OutputBlock,
    PanelBlock,
    RunConfig,
    complex_to_json,
    parse_complex,
    to_jsonable,
)

FIGURES = [f"fig{k}" for k in range(1, 8)]


@pytest.mark.parametrize(
    "value, expected",
    [
        (2, 2 + 0j),
        (1.5, 1.5 + 0j),
        ("1+2i", 1 + 2j),
        ("1 - 0.5j", 1 - 0.5j),
        ([3, -1], 3 - 1j),
        ({"re": 0.5}, 0.5 + 0j),
        ({"re": 1, "im": 2}, 1 + 2j),
    ],
)
def test_parse_complex(value, expected):
    assert parse_complex(value) == expected


@pytest.mark.parametrize("value", [True, "abc", [1, 2, 3], {"x": 1}, None])
def test_parse_complex_rejects(value):
    with pytest.raises(ValueError):
        parse_complex(value)


def test_complex_to_json():
    assert complex_to_json(2 + 0j) == 2.0
    assert complex_to_json(1 - 2j) == {"re": 1.0, "im": -2.0}


@pytest.mark.parametrize("name", FIGURES)
def test_figure_configs_validate(configs_dir, name):
    config = RunConfig.from_file(configs_dir / f"{name}.json")
    assert config.name == name
    assert config.experiment.panels
    spec = config.model.to_spec()
    assert spec.n == 400


def test_flat_experiment_becomes_one_panel():
    block = ExperimentBlock.model_validate({"samples": 10, "limit": 4, "kappa": 1, "normalizer": 4})
    assert len(block.panels) == 1
    assert block.panels[0].limit == 4
    assert block.panels[0].normalizer == 4
    assert block.samples == 10


def test_panel_needs_exactly_one_target():
    with pytest.raises(ValidationError):
        PanelBlock.model_validate({"kappa": 1})
    with pytest.raises(ValidationError):
        PanelBlock.model_validate({"target": 0, "limit": 2})
    with pytest.raises(ValidationError):
        PanelBlock.model_validate({"target": 0, "kappa": -1})
    assert PanelBlock.model_validate({"target": 0}).kappa == "auto"


def test_model_invariants_fail_validation():
    with pytest.raises(ValidationError):
        ModelBlock.model_validate({"kind": "Conjugation", "alphas": [1], "betas": [2]})
    with pytest.raises(ValidationError, match="position"):
        ModelBlock.model_validate({"kind": "Conjugation", "polynomial": "x + z", "alphas": [1], "betas": [2]})
    with pytest.raises(ValidationError):
        ModelBlock.model_validate({"kind": "Rotation", "alphas": [1, 2, 3], "n": 4})
    with pytest.raises(ValidationError):
        ModelBlock.model_validate({"kind": "Lattice", "alphas": [1]})


def test_complex_alphas():
    block = ModelBlock.model_validate({"kind": "Rotation", "alphas": ["1+1i", [2, 0]], "n": 10})
    assert block.kind is ModelKind.ROTATION
    assert block.alphas == [1 + 1j, 2 + 0j]


def test_unknown_limit_fails_validation():
    payload = {
        "model": {"kind": "Rotation", "alphas": [4, 2, 1], "n": 40},
        "experiment": {"limit": 3, "kappa": 1},
    }
    with pytest.raises(ValidationError):
        RunConfig.model_validate(payload)
    payload["experiment"] = {"target": 6, "kappa": 1}
    with pytest.raises(ValidationError):
        RunConfig.model_validate(payload)


def test_output_block():
    block = OutputBlock.model_validate({"range": [-3, 3], "bins": 30})
    assert block.value_range == (-3, 3)
    assert OutputBlock(value_range=(-1, 1)).value_range == (-1, 1)
    with pytest.raises(ValidationError):
        OutputBlock.model_validate({"bins": 10, "bin_width": 0.1})
    with pytest.raises(ValidationError):
        OutputBlock.model_validate({"range": [2, 1]})


def test_json_round_trip(configs_dir):
    config = RunConfig.from_file(configs_dir / "fig4.json")
    text = config.model_dump_json(by_alias=True)
    again = RunConfig.model_validate_json(text)
    assert again == config
    assert json.loads(text)["model"]["alphas"] == [1.0, 1.0]


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        RunConfig.from_file(tmp_path / "nope.json")


def test_to_jsonable():
    payload = {"a": np.float64(1.5), "b": [1 + 2j, np.int64(3)], "c": np.array([1.0, 2.0]), 4: float("inf")}
    assert to_jsonable(payload) == {"a": 1.5, "b": [{"re": 1.0, "im": 2.0}, 3], "c": [1.0, 2.0], "4": "inf"}
