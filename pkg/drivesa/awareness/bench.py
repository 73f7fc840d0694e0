# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Experiments over synthetic datasets: method ladder, memory capacity sweep
and memory shape comparison, each repeated over a list of seeds"""

import dataclasses
from datetime import datetime
import logging
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .config import check_config
from .evaluation import run_cv
from .features import SensoryRadii, extract_all
from .synthetic import GenConfig, gen_dataset

logger = logging.getLogger(__name__)

LADDER = ("baseline3", "method1", "method12", "method123")
CAPACITIES = (3, 5, 7, 9, 11)
SHAPES = ("tanh", "step", "linear")

EXPERIMENTS = ("ladder", "capacity", "shape")


def _medians(per_seed: Mapping[str, Mapping[str, Optional[float]]]) -> Dict[str, float]:
    columns: Dict[str, List[float]] = {}
    for row in per_seed.values():
        for name, value in row.items():
            if value is not None:
                columns.setdefault(name, []).append(value)
    return {name: float(np.median(values)) for name, values in columns.items()}


def _over_seeds(
    seeds: Sequence[int],
    gen: GenConfig,
    conf: Mapping[str, Any],
    variants: Mapping[str, Any],
    run: Callable,
    threads: int,
) -> Dict[str, Dict[str, Optional[float]]]:
    per_seed: Dict[str, Dict[str, Optional[float]]] = {}
    for seq_no, seed in enumerate(seeds, start=1):
        logger.info("Running seed %s (%s/%s)", seed, seq_no, len(seeds))
        ds, _ = gen_dataset(dataclasses.replace(gen, seed=seed), threads=threads)
        table = extract_all(
            ds,
            SensoryRadii(tuple(conf["radii"])),
            conf["max_distance_deg"],
            threads=threads,
        )
        per_seed[str(seed)] = {
            name: run(ds, table, variant, seed) for name, variant in variants.items()
        }
    return per_seed


def run_experiment(
    name: str,
    seeds: Sequence[int],
    gen: Optional[GenConfig] = None,
    conf: Optional[Mapping[str, Any]] = None,
    threads: int = 1,
) -> Dict[str, Any]:
    """Pooled cross-validated accuracies per seed and their medians"""
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}, expected one of {EXPERIMENTS}")
    gen = gen or GenConfig()
    conf = check_config(dict(conf or {}, memory_sweep=[]))
    start_time = datetime.now()

    if name == "ladder":
        variants: Dict[str, Any] = {m: m for m in LADDER}

        def run(ds, table, method, seed):
            return run_cv(ds, method, conf, seed, table, threads).accuracy

    else:
        key = "memory_capacity" if name == "capacity" else "memory_shape"
        values = CAPACITIES if name == "capacity" else SHAPES
        variants = {str(v): v for v in values}

        def run(ds, table, value, seed):
            return run_cv(
                ds, "method123", dict(conf, **{key: value}), seed, table, threads
            ).accuracy

    per_seed = _over_seeds(seeds, gen, conf, variants, run, threads)
    medians = _medians(per_seed)
    result: Dict[str, Any] = {
        "experiment": name,
        "seeds": list(seeds),
        "generator": {
            "capacity": gen.capacity,
            "label_noise": gen.label_noise,
            "n_scenes": gen.n_scenes,
            "n_participants": gen.n_participants,
        },
        "per_seed": per_seed,
        "median": medians,
        "checks": _checks(name, medians),
    }
    logger.info("Completed %s experiment in %s", name, datetime.now() - start_time)
    return result


def _checks(name: str, medians: Mapping[str, float]) -> Dict[str, Any]:
    expected = {"ladder": LADDER, "capacity": map(str, CAPACITIES), "shape": SHAPES}
    if not set(expected[name]) <= set(medians):
        return {}
    if name == "ladder":
        m = medians
        return {
            "method1_over_baseline3_pct": m["method1"] - m["baseline3"],
            "method123_over_method12_pct": m["method123"] - m["method12"],
            "baseline3_below_method1": m["baseline3"] < m["method1"],
            "method12_at_most_method123": m["method12"] <= m["method123"],
        }
    if name == "capacity":
        best = max(medians, key=lambda k: (medians[k], -int(k)))
        return {"best_capacity": int(best)}
    return {
        "tanh_at_least_step": medians["tanh"] >= medians["step"],
        "tanh_at_least_linear": medians["tanh"] >= medians["linear"],
    }
