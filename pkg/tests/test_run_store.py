import json

import numpy as np
import pytest

from oval_lab_app import run_store as store
from oval_lab_app.errors import UsageError


def test_save_and_load_summary(tmp_path):
    out = str(tmp_path / "run")
    summary = {"command": "bowl", "C0": np.float64(0.5), "ok": np.bool_(True), "v": np.arange(3)}
    store.save_summary(out, summary)
    on_disk = json.loads((tmp_path / "run" / store.SUMMARY_FILENAME).read_text())
    assert on_disk["_schema_version"] == store.SCHEMA_VERSION
    assert on_disk["C0"] == 0.5
    assert on_disk["ok"] is True
    assert on_disk["v"] == [0, 1, 2]
    assert store.load_summary(out)["command"] == "bowl"


def test_non_finite_values_become_null(tmp_path):
    store.save_summary(str(tmp_path), {"a": float("nan"), "b": [np.inf, 1.0]})
    loaded = store.load_summary(str(tmp_path))
    assert loaded["a"] is None
    assert loaded["b"] == [None, 1.0]


def test_summary_falls_back_to_backup(tmp_path):
    out = str(tmp_path)
    store.save_summary(out, {"round": 1})
    store.save_summary(out, {"round": 2})
    (tmp_path / store.SUMMARY_FILENAME).write_text("{ broken")
    assert store.load_summary(out)["round"] == 1
    (tmp_path / f"{store.SUMMARY_FILENAME}.bak").write_text("[]")
    assert store.load_summary(out) == {}


def test_series_csv_keeps_order_and_precision(tmp_path):
    path = str(tmp_path / "sub" / "series.csv")
    tau = [-50.0, -49.5, -49.0]
    alpha = [1.0 / 3.0, float("nan"), -0.25]
    store.write_series_csv(path, {"alpha": alpha, "tau": tau}, order=["tau", "alpha"])
    header = (tmp_path / "sub" / "series.csv").read_text().splitlines()[0]
    assert header == "tau,alpha"
    data = store.read_series_csv(path)
    assert data["alpha"][0] == 1.0 / 3.0
    assert np.isnan(data["alpha"][1])
    np.testing.assert_array_equal(data["tau"], tau)


def test_series_csv_rejects_ragged_columns(tmp_path):
    with pytest.raises(UsageError):
        store.write_series_csv(str(tmp_path / "x.csv"), {"a": [1.0], "b": [1.0, 2.0]})
    with pytest.raises(FileNotFoundError):
        store.read_series_csv(str(tmp_path / "missing.csv"))


def test_sampled_function_layout(tmp_path):
    path = store.write_sampled_csv(str(tmp_path / "u.csv"), [0.0, 0.5], [1.5, 1.25])
    assert open(path, encoding="utf-8").readline().strip() == "y,value"
    data = store.read_series_csv(path)
    np.testing.assert_array_equal(data["value"], [1.5, 1.25])


def test_snapshots_keep_ragged_curves(tmp_path):
    curves = [(np.linspace(-1, 1, 5), np.array([0, 1, 2, 1, 0.0])), (np.zeros(3), np.ones(3))]
    store.save_snapshots(str(tmp_path), [-10.0, -9.0], curves, n=3)
    data = store.load_snapshots(str(tmp_path))
    assert data["n"] == 3
    np.testing.assert_array_equal(data["tau"], [-10.0, -9.0])
    assert len(data["curves"]) == 2
    np.testing.assert_array_equal(data["curves"][0][1], curves[0][1])
    assert data["curves"][1][0].shape == (3,)
    with pytest.raises(FileNotFoundError):
        store.load_snapshots(str(tmp_path / "none"))
