import json

import pytest

from ..config import (
    SHIPPED_CONFIGS,
    PipelineConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from ..gpshield import make_partition, run_abstract
from ..ltl import compile_safety


@pytest.mark.parametrize("name", SHIPPED_CONFIGS)
def test_shipped_configs(name):
    config = load_config(name)
    assert config.name == name
    assert config.system.name == "planar4"
    partition = make_partition(config)
    assert partition.counts == (40, 40)
    assert "b" in partition.ap
    _, _, dfa = compile_safety(config.synthesis.spec, partition.ap)
    assert not dfa.accepting[dfa.initial]


def test_complex_config_labels():
    config = load_config("planar4_complex")
    partition = make_partition(config)
    assert partition.ap == ("b", "c", "d", "r", "w")
    assert "w" in partition.label_of(int(partition.locate([-1.3, 1.1])))
    assert partition.label_of(int(partition.locate([0.0, 0.0]))) == {"b"}


def test_defaults():
    config = load_config()
    assert config == PipelineConfig()
    assert config.synthesis.spec == "G(!b)"
    assert config.abstraction.grid == (40, 40)


@pytest.mark.parametrize("name", SHIPPED_CONFIGS)
def test_config_file(tmp_path, name):
    original = load_config(name)
    path = tmp_path / "{n}.json".format(n=name)
    path.write_text(json.dumps(config_to_dict(original)))
    assert load_config(path) == original
    assert config_from_dict(config_to_dict(original)) == original


def test_regions_serialize_as_boxes():
    data = config_to_dict(load_config("planar4_obstacles"))
    regions = data["abstraction"]["regions"]
    assert len(regions) == 3
    assert regions[0] == {"label": "b", "lower": [-1.0, -0.5], "upper": [-0.5, 0.5]}
    assert json.loads(json.dumps(data)) == data


def test_delta_is_required(tmp_path):
    with pytest.raises(ValueError, match="delta"):
        config_from_dict({})
    with pytest.raises(ValueError, match="delta"):
        config_from_dict({"abstraction": {"grid": [4, 4]}})
    with pytest.raises(ValueError, match="delta"):
        config_from_dict({"abstraction": {"delta": 1.5}})
    with pytest.raises(ValueError, match="delta"):
        config_from_dict({"abstraction": {"delta": [0.01, 0.0]}})
    config = config_from_dict({"abstraction": {"delta": [0.01, 0.02]}})
    assert config.abstraction.delta == (0.01, 0.02)

    path = tmp_path / "nodelta.json"
    path.write_text(json.dumps({"abstraction": {"grid": [4, 4]}}))
    with pytest.raises(ValueError, match="delta"):
        load_config(path)
    # the built-in defaults leave it unset and the abstraction stage refuses
    assert PipelineConfig().abstraction.delta is None
    with pytest.raises(ValueError, match="delta"):
        run_abstract(PipelineConfig(), tmp_path / "unused.gp.npz")


def test_rejects_unknown_keys():
    with pytest.raises(ValueError, match="Unknown keys"):
        config_from_dict({"model": {"budgets": 3}})
    with pytest.raises(ValueError, match="sections"):
        config_from_dict({"extras": {}})
    with pytest.raises(ValueError):
        config_from_dict({"model": [1, 2]})


def test_rejects_invalid_values():
    with pytest.raises(ValueError):
        config_from_dict({"synthesis": {"p": 0.0}})
    with pytest.raises(ValueError):
        config_from_dict({"synthesis": {"tol": 0.0}})
    with pytest.raises(ValueError):
        config_from_dict({"abstraction": {"mean_method": "affine"}})
    with pytest.raises(ValueError):
        config_from_dict({"data": {"per_mode": 0}})


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.json")
    with pytest.raises(FileNotFoundError):
        load_config("planar5")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ValueError, match="Malformed"):
        load_config(broken)
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")
    with pytest.raises(ValueError):
        load_config(listing)
