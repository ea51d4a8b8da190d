import json
import math

import pytest

from oval_lab_app.config import LabConfig, load_config, override, validate_config
from oval_lab_app.errors import UsageError


def test_missing_file_gives_defaults(tmp_path):
    config = load_config(str(tmp_path / "absent.json"))
    assert config == LabConfig()
    assert config.entry_height == pytest.approx(5.0)


def test_corrupt_file_falls_back_to_defaults(tmp_path):
    path = tmp_path / "oval_lab.json"
    path.write_text("{ not json")
    assert load_config(str(path)) == LabConfig()


def test_file_values_and_nested_grid(tmp_path):
    path = tmp_path / "oval_lab.json"
    path.write_text(
        json.dumps({"n": 3, "tau0": -30, "grids": {"half_length": 10, "count": 1001}, "extra": 1})
    )
    config = load_config(str(path))
    assert config.n == 3
    assert config.tau0 == -30
    assert config.grids.half_length == 10.0
    assert config.grids.count == 1001
    assert config.entry_height == pytest.approx(5.0 * math.sqrt(2.0))
    assert config.to_dict()["y0"] == pytest.approx(5.0 * math.sqrt(2.0))


def test_invalid_values_are_rejected(tmp_path):
    path = tmp_path / "oval_lab.json"
    path.write_text(json.dumps({"tau0": -10, "tau1": -20}))
    with pytest.raises(UsageError):
        load_config(str(path))
    path.write_text(json.dumps({"grids": {"count": 1000}}))
    with pytest.raises(UsageError):
        load_config(str(path))
    path.write_text(json.dumps([1, 2]))
    with pytest.raises(UsageError):
        load_config(str(path))


def test_override_skips_none_and_revalidates():
    base = LabConfig()
    assert override(base, n=None) is base
    changed = override(base, n=3, nodes=800)
    assert (changed.n, changed.nodes) == (3, 800)
    with pytest.raises(UsageError):
        override(base, n=1)
    with pytest.raises(UsageError):
        validate_config(LabConfig(cfl=0.9))
