"""
File-based configuration for Oval Lab runs.

A configuration is a single JSON object. Every key is optional; anything left
out takes the default below. The CLI reads the file named by `--config`, then
lets explicit flags override individual values.

Example `oval_lab.json`:
{
    "n": 2,
    "tau0": -50,
    "tau1": -40,
    "nodes": 400,
    "grids": {"half_length": 20, "count": 4001},
    "y0": 5.0,
    "a_max": 200
}
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional

from oval_lab_app.errors import UsageError

logger = logging.getLogger(__name__)

# Default configuration file looked up in the working directory.
CONFIG_FILENAME = "oval_lab.json"


@dataclass(frozen=True)
class GridSettings:
    half_length: float = 20.0
    count: int = 4001


@dataclass(frozen=True)
class LabConfig:
    """Every tunable knob of the laboratory, with its default."""

    n: int = 2
    tau0: float = -50.0
    tau1: float = -25.0
    nodes: int = 4000
    steps: Optional[int] = None
    cfl: float = 0.2
    record_every: float = 0.5
    ode_step: float = 1e-2
    bowl_step: float = 1e-3
    cap_extent_M: float = 30.0
    grids: GridSettings = field(default_factory=GridSettings)
    y0: Optional[float] = None
    a_max: float = 200.0
    a_ratio: float = 1.05
    b_min: float = 1e-3
    b_max: float = 1.0
    b_count: int = 12
    trumpet_Y: float = 100.0
    delta0: float = 0.05
    L0: float = 4.0
    tip_rho: float = 10.0
    rho_max: float = 40.0

    @property
    def entry_height(self) -> float:
        """y0, defaulting to 5·sqrt(n-1)."""
        if self.y0 is not None:
            return float(self.y0)
        return 5.0 * math.sqrt(self.n - 1)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["y0"] = self.entry_height
        return out


def validate_config(config: LabConfig) -> LabConfig:
    """
    Checks the semantic constraints on a configuration.

    Raises:
        UsageError: if any value is outside its admissible range.
    """
    if config.n < 2:
        raise UsageError(f"dimension n must be >= 2 (got {config.n})")
    if config.tau0 >= 0:
        raise UsageError(f"tau0 must be negative (got {config.tau0})")
    if config.tau1 <= config.tau0 or config.tau1 >= 0:
        raise UsageError("tau1 must satisfy tau0 < tau1 < 0")
    if config.nodes < 16:
        raise UsageError(f"nodes must be >= 16 (got {config.nodes})")
    if not 0 < config.cfl <= 0.5:
        raise UsageError(f"cfl must lie in (0, 0.5] (got {config.cfl})")
    if config.grids.count < 3 or config.grids.count % 2 == 0:
        raise UsageError("grids.count must be an odd integer >= 3")
    if config.grids.half_length <= 0:
        raise UsageError("grids.half_length must be positive")
    if config.ode_step <= 0 or config.bowl_step <= 0:
        raise UsageError("integration steps must be positive")
    if config.a_ratio <= 1.0:
        raise UsageError("a_ratio must exceed 1")
    if not 0 < config.b_min < config.b_max:
        raise UsageError("b range must satisfy 0 < b_min < b_max")
    if config.entry_height <= 0:
        raise UsageError("y0 must be positive")
    return config


def _from_mapping(data: Dict[str, Any]) -> LabConfig:
    known = {f.name for f in fields(LabConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        logger.warning("ignoring unknown configuration keys: %s", ", ".join(unknown))
    kwargs = {k: v for k, v in data.items() if k in known and k != "grids"}
    grids = data.get("grids") or {}
    if not isinstance(grids, dict):
        raise UsageError("grids must be an object with half_length and count")
    try:
        settings = GridSettings(
            half_length=float(grids.get("half_length", GridSettings.half_length)),
            count=int(grids.get("count", GridSettings.count)),
        )
        config = LabConfig(grids=settings, **kwargs)
    except TypeError as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    return config


def load_config(config_filepath: Optional[str] = None) -> LabConfig:
    """
    Loads a laboratory configuration from a JSON file.

    A missing file means "use the defaults". A file that cannot be parsed is
    treated the same way, with a warning, so a damaged config never blocks a
    run. Values that parse but make no sense are rejected.

    Args:
        config_filepath: Path to the JSON document. Defaults to
                         CONFIG_FILENAME in the current directory.

    Returns:
        A validated LabConfig.
    """
    path = config_filepath or CONFIG_FILENAME
    if not os.path.exists(path):
        return validate_config(LabConfig())
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, IOError):
        logger.warning("could not read configuration %s; using defaults", path)
        return validate_config(LabConfig())
    if not isinstance(data, dict):
        raise UsageError("configuration must be a JSON object")
    return validate_config(_from_mapping(data))


def override(config: LabConfig, **values: Any) -> LabConfig:
    """Returns a copy with the non-None keyword values applied."""
    changes = {k: v for k, v in values.items() if v is not None}
    if not changes:
        return config
    return validate_config(replace(config, **changes))
