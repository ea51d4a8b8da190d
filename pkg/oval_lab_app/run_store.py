"""
Run storage for Oval Lab.

Every command writes into an output directory: a JSON summary, one or more CSV
series, and for flow runs a compressed archive of profile snapshots. Summaries
are replaced atomically (write to a temporary sibling, fsync, rotate the old
file to `.bak`, `os.replace`) so an interrupted run never leaves a half-written
document behind, and readers fall back to the backup when the primary is
damaged.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from oval_lab_app.errors import UsageError

logger = logging.getLogger(__name__)

# Summary schema version for forward migrations
SCHEMA_VERSION = 1
SUMMARY_FILENAME = "summary.json"
SNAPSHOT_FILENAME = "profiles.npz"


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        # JSON has no inf/nan
        if not np.isfinite(v):
            return None
        return v
    return value


def _load_json_file(path: str) -> Optional[Dict[str, Any]]:
    """Internal helper to load a JSON document, returning None on failure."""
    if not os.path.exists(path):
        return None
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, IOError):
        return None
    return data if isinstance(data, dict) else None


def save_summary(
    out_dir: str, summary: Dict[str, Any], filename: str = SUMMARY_FILENAME
) -> str:
    """
    Atomically writes a JSON summary into `out_dir`.

    Args:
        out_dir: Output directory, created if missing.
        summary: The document to store; `_schema_version` is added.
        filename: Name of the summary file inside `out_dir`.

    Returns:
        The path of the written file.
    """
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    backup = f"{path}.bak"
    document = to_jsonable(dict(summary))
    document["_schema_version"] = SCHEMA_VERSION
    payload = json.dumps(document, indent=4)

    tmp_path = f"{path}.tmp-{os.getpid()}"
    with open(tmp_path, "w", encoding="utf-8") as f:
        f.write(payload)
        f.flush()
        try:
            os.fsync(f.fileno())
        except OSError:
            pass
    if os.path.exists(path):
        try:
            os.replace(path, backup)
        except OSError:
            logger.warning("could not rotate %s to backup", path)
    os.replace(tmp_path, path)
    return path


def load_summary(out_dir: str, filename: str = SUMMARY_FILENAME) -> Dict[str, Any]:
    """
    Loads a summary, falling back to its backup, then to an empty dict.
    """
    path = os.path.join(out_dir, filename)
    primary = _load_json_file(path)
    if primary is not None:
        return primary
    backup = _load_json_file(f"{path}.bak")
    if backup is not None:
        logger.warning("summary %s unreadable; using backup", path)
        return backup
    return {}


def write_series_csv(
    path: str, columns: Mapping[str, Sequence[float]], order: Optional[List[str]] = None
) -> str:
    """
    Writes equal-length columns as a CSV file with a header row.

    Raises:
        UsageError: if the columns differ in length.
    """
    names = order or list(columns)
    lengths = {len(columns[name]) for name in names}
    if len(lengths) > 1:
        raise UsageError(f"CSV columns have different lengths: {sorted(lengths)}")
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    rows: Iterable = zip(*(columns[name] for name in names))
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(names)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    return path


def read_series_csv(path: str) -> Dict[str, NDArray[np.float64]]:
    """Reads a CSV written by `write_series_csv` into numpy columns."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"series file '{path}' not found")
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return {}
        data: List[List[float]] = [[] for _ in header]
        for row in reader:
            for i, value in enumerate(row):
                data[i].append(float(value))
    return {name: np.asarray(col, dtype=np.float64) for name, col in zip(header, data)}


def write_sampled_csv(path: str, y: Sequence[float], values: Sequence[float]) -> str:
    """Sampled function in the `y,value` layout."""
    return write_series_csv(path, {"y": y, "value": values}, order=["y", "value"])


def save_snapshots(
    out_dir: str,
    taus: Sequence[float],
    curves: Sequence[tuple],
    n: int,
    filename: str = SNAPSHOT_FILENAME,
) -> str:
    """
    Stores recorded generating curves as `y_<k>`, `r_<k>` arrays plus `tau`.
    """
    os.makedirs(out_dir, exist_ok=True)
    arrays: Dict[str, Any] = {
        "tau": np.asarray(taus, dtype=np.float64),
        "n": np.asarray([n]),
    }
    for k, (y, r) in enumerate(curves):
        arrays[f"y_{k}"] = np.asarray(y, dtype=np.float64)
        arrays[f"r_{k}"] = np.asarray(r, dtype=np.float64)
    path = os.path.join(out_dir, filename)
    np.savez_compressed(path, **arrays)
    return path


def load_snapshots(out_dir: str, filename: str = SNAPSHOT_FILENAME) -> Dict[str, Any]:
    """
    Returns {"tau": array, "n": int, "curves": [(y, r), ...]}.
    """
    path = os.path.join(out_dir, filename)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no snapshots in '{out_dir}' (run `evolve` first)")
    with np.load(path) as data:
        taus = np.asarray(data["tau"], dtype=np.float64)
        curves = [
            (np.asarray(data[f"y_{k}"]), np.asarray(data[f"r_{k}"]))
            for k in range(len(taus))
        ]
        n = int(data["n"][0])
    return {"tau": taus, "n": n, "curves": curves}
