# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import psutil

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid configuration value"""


# defaults of the "awareness" configuration stanza
DEFAULTS: Dict[str, Any] = {
    "radii": [2.5, 4.1, 9.1, 15.0],
    "max_distance_deg": 60.0,
    "reference_heights": None,
    "svm_c": 1.0,
    "svm_c_grid": None,
    "svm_max_iter": 20000,
    "svm_tol": 1e-8,
    "logistic_l2": 1e-4,
    "logistic_max_iter": 100,
    "logistic_tol": 1e-8,
    "memory_capacity": 7,
    "memory_shape": "tanh",
    "memory_sweep": [3, 5, 7, 9, 11],
    "stage2_append_projection": False,
    "calibration": "sigmoid",
    "pca_k": None,
    "inner_folds": 7,
    "baseline1_radius": 2.5,
    "baseline1_duration_ms": 120.0,
    "baseline1_points": 200,
    "threads": None,
}

# format understood by swh.core.config.read
DEFAULT_CONFIG: Dict[str, Any] = {"awareness": ("dict", {})}

MEMORY_SHAPES = ("tanh", "step", "linear")


def default_threads() -> int:
    """Number of physical cores, falling back to logical ones"""
    return max(1, psutil.cpu_count(logical=False) or psutil.cpu_count() or 1)


def _positive(conf, key, kind=float):
    value = conf[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if not value > 0:
        raise ConfigError(f"{key}: must be positive, got {value!r}")
    conf[key] = kind(value)


def check_config(conf: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """check configuration and propagate defaults"""
    conf = dict(conf or {})
    unknown = set(conf) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    for key, value in DEFAULTS.items():
        if key not in conf:
            conf[key] = list(value) if isinstance(value, list) else value

    radii = [float(r) for r in conf["radii"]]
    if len(radii) == 0 or any(r <= 0 for r in radii):
        raise ConfigError(f"radii: must be positive, got {conf['radii']!r}")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigError(f"radii: must be strictly increasing, got {radii!r}")
    conf["radii"] = radii

    for key in (
        "max_distance_deg",
        "svm_c",
        "svm_tol",
        "logistic_l2",
        "logistic_tol",
        "baseline1_radius",
        "baseline1_duration_ms",
    ):
        _positive(conf, key)
    for key in (
        "svm_max_iter",
        "logistic_max_iter",
        "memory_capacity",
        "inner_folds",
        "baseline1_points",
    ):
        _positive(conf, key, int)
    if conf["inner_folds"] < 2:
        raise ConfigError("inner_folds: at least 2 folds are needed")
    if conf["baseline1_points"] < 2:
        raise ConfigError("baseline1_points: at least 2 grid points are needed")

    if conf["memory_shape"] not in MEMORY_SHAPES:
        raise ConfigError(
            f"memory_shape: expected one of {', '.join(MEMORY_SHAPES)}, "
            f"got {conf['memory_shape']!r}"
        )
    sweep = conf["memory_sweep"] or []
    if any(isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in sweep):
        raise ConfigError(f"memory_sweep: expected positive integers, got {sweep!r}")
    conf["memory_sweep"] = [int(n) for n in sweep]

    if conf["calibration"] != "sigmoid":
        raise ConfigError(
            f"calibration: only 'sigmoid' is supported, got {conf['calibration']!r}"
        )
    if conf["svm_c_grid"] is not None:
        grid = [float(c) for c in conf["svm_c_grid"]]
        if not grid or any(c <= 0 for c in grid):
            raise ConfigError(f"svm_c_grid: expected positive values, got {grid!r}")
        conf["svm_c_grid"] = grid
    pca_k = conf["pca_k"]
    if pca_k is not None and pca_k != "auto":
        if isinstance(pca_k, bool) or not isinstance(pca_k, int) or pca_k < 1:
            raise ConfigError("pca_k: expected a positive integer or 'auto'")
    heights = conf["reference_heights"]
    if heights is not None:
        if not isinstance(heights, dict) or any(
            not (isinstance(v, (int, float)) and v > 0) for v in heights.values()
        ):
            raise ConfigError(
                "reference_heights: expected a mapping kind -> positive height"
            )
        conf["reference_heights"] = {str(k): float(v) for k, v in heights.items()}
    conf["stage2_append_projection"] = bool(conf["stage2_append_projection"])

    if conf["threads"] is None:
        conf["threads"] = default_threads()
        logger.debug("Defaulting to %s threads", conf["threads"])
    _positive(conf, "threads", int)

    return conf


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation depends on"""

    dataset: Optional[Path]
    method: Optional[str]
    seed: Optional[int]
    conf: Dict[str, Any] = field(default_factory=check_config)
    outputs: Dict[str, str] = field(default_factory=dict)

    @property
    def threads(self) -> int:
        return self.conf["threads"]

    def echo(self) -> Dict[str, Any]:
        """JSON-serialisable configuration, embedded in artifacts.

        The thread count is left out: it never changes results.
        """
        conf = {k: v for k, v in self.conf.items() if k != "threads"}
        return {
            "dataset": str(self.dataset) if self.dataset is not None else None,
            "method": self.method,
            "seed": self.seed,
            "config": conf,
        }
