# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Synthetic datasets with known ground-truth awareness.

Objects move on linear, jittered trajectories and get random properties.
Participants look at objects with probability proportional to
``exp(salience)``, or at the background. The awareness oracle combines the
fixation rule of Baseline 1 with a capacity limit on a salience-recency
ranking, then flips labels at a fixed noise rate.
"""

from concurrent.futures import ThreadPoolExecutor
import dataclasses
from dataclasses import dataclass, field
from datetime import datetime
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .config import ConfigError
from .features import BoxFrames, GazeFrames, derive_area_change
from .pipeline import _frame_distances, fixation_time
from .scene import (
    AwarenessLabel,
    Contrast,
    Dataset,
    GazeTrack,
    Movement,
    ObjectKind,
    ObjectProperties,
    ObjectTrack,
    RegionPolygon,
    SceneRecord,
    frame_times,
)

logger = logging.getLogger(__name__)

ORACLE_COLUMNS = (
    "participant",
    "scene",
    "object",
    "is_target",
    "fixated",
    "fixation_time",
    "dwell",
    "salience",
    "rank",
    "pre_label",
    "label",
)

# screen extent in degrees, centered on the straight-ahead direction
SCREEN_X = (-30.0, 30.0)
SCREEN_Y = (-15.0, 15.0)

SPEEDS = {
    Movement.STATIC: 0.0,
    Movement.SLOW: 0.6,
    Movement.MEDIUM: 1.5,
    Movement.HIGH: 3.0,
}
HEIGHTS = {ObjectKind.PEDESTRIAN: (3.0, 0.8), ObjectKind.VEHICLE: (4.0, 1.2)}
ASPECT = {ObjectKind.PEDESTRIAN: 0.4, ObjectKind.VEHICLE: 1.6}


@dataclass(frozen=True)
class SalienceWeights:
    relevance: float = 1.2
    contrast: float = 0.9
    movement: float = 0.8
    pedestrian: float = 0.3
    light_green: float = 0.2
    proximity: float = -0.05

    def __call__(self, props: ObjectProperties, proximity: float) -> float:
        contrast = list(Contrast).index(props.contrast) / 2
        movement = list(Movement).index(props.movement) / 3
        return (
            self.relevance * props.relevance
            + self.contrast * contrast
            + self.movement * movement
            + self.pedestrian * (props.kind is ObjectKind.PEDESTRIAN)
            + self.light_green * props.light_green
            + self.proximity * proximity
        )


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_scenes: int = 8
    n_participants: int = 44
    objects_mean: float = 7.5
    objects_sd: float = 3.0
    min_objects: int = 2
    frame_rate: float = 60.0
    window_len: float = 10.0
    lead_time: float = 2.0
    pixels_per_degree: float = 30.0
    vanishing_point: Tuple[float, float] = (0.0, 2.0)
    salience: SalienceWeights = field(default_factory=SalienceWeights)
    background_prob: float = 0.3
    fixation_median: float = 0.35
    fixation_sigma: float = 0.5
    saccade_frames: int = 2
    pursuit_noise: float = 0.4
    invalid_rate: float = 0.01
    box_jitter: float = 0.05
    capacity: Optional[int] = 7
    fixation_radius: float = 2.5
    fixation_ms: float = 120.0
    recency_weight: float = 0.02
    label_noise: float = 0.1
    target_negative_share: Optional[float] = None

    def __post_init__(self):
        for name in ("n_scenes", "n_participants", "min_objects"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name}: expected a positive integer, got {value!r}")
        for name in (
            "frame_rate",
            "window_len",
            "pixels_per_degree",
            "fixation_median",
            "fixation_radius",
            "fixation_ms",
        ):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")
        if self.lead_time < 0:
            raise ConfigError("lead_time: must not be negative")
        if not 0 <= self.label_noise < 0.5:
            raise ConfigError(
                f"label_noise: must be in [0, 0.5), got {self.label_noise}"
            )
        if not 0 <= self.background_prob < 1:
            raise ConfigError("background_prob: must be in [0, 1)")
        if not 0 <= self.invalid_rate < 1:
            raise ConfigError("invalid_rate: must be in [0, 1)")
        if self.capacity is not None and self.capacity < 1:
            raise ConfigError("capacity: must be positive, or None for no limit")
        if self.target_negative_share is not None and not (
            0 < self.target_negative_share < 1
        ):
            raise ConfigError("target_negative_share: must be in (0, 1)")

    @property
    def pause_time(self) -> float:
        return self.lead_time + self.window_len


@dataclass(frozen=True, eq=False)
class OracleTrace:
    """Ground truth behind the generated labels, one row per
    (participant, scene, object)"""

    frame: pd.DataFrame

    def __len__(self):
        return len(self.frame)

    def targets(self) -> pd.DataFrame:
        return self.frame[self.frame["is_target"]]


def _regions() -> Tuple[RegionPolygon, ...]:
    (x0, x1), (y0, y1) = SCREEN_X, SCREEN_Y
    pad = 100.0
    top, bottom = y0 - pad, y1 + pad
    left, right = x0 - pad, x1 + pad
    return (
        RegionPolygon(
            "left", ((left, top), (0.0, top), (0.0, bottom), (left, bottom))
        ),
        RegionPolygon(
            "right", ((0.0, top), (right, top), (right, bottom), (0.0, bottom))
        ),
    )


def _gen_objects(
    cfg: GenConfig, rng: np.random.Generator, frames: np.ndarray
) -> List[ObjectTrack]:
    drawn = int(round(rng.normal(cfg.objects_mean, cfg.objects_sd)))
    n_objects = max(cfg.min_objects, drawn)
    kinds = list(ObjectKind)
    target_kind = kinds[rng.integers(len(kinds))]
    object_kinds = [kinds[i] for i in rng.integers(len(kinds), size=n_objects)]
    if target_kind not in object_kinds:
        object_kinds[0] = target_kind

    n_frames = len(frames)
    objects = []
    for j, kind in enumerate(object_kinds):
        props = ObjectProperties(
            kind=kind,
            relevance=bool(rng.random() < 0.5),
            light_green=bool(rng.random() < 0.5),
            contrast=list(Contrast)[rng.integers(3)],
            movement=list(Movement)[rng.integers(4)],
            area_change=False,
        )
        height = max(0.5, rng.normal(*HEIGHTS[kind]))
        width = height * ASPECT[kind]
        end = np.array([rng.uniform(*SCREEN_X), rng.uniform(*SCREEN_Y)])
        angle = rng.uniform(0, 2 * math.pi)
        velocity = SPEEDS[props.movement] * np.array([math.cos(angle), math.sin(angle)])
        # objects may appear during the window, all are visible at the pause
        first = int(rng.integers(0, int(0.6 * n_frames) + 1))
        t = frames[first:]
        centers = end + (t - frames[-1])[:, None] * velocity
        centers = centers + rng.normal(0, cfg.box_jitter, size=centers.shape)
        boxes = np.column_stack(
            [
                t,
                centers[:, 0] - width / 2,
                centers[:, 1] - height / 2,
                centers[:, 0] + width / 2,
                centers[:, 1] + height / 2,
            ]
        )
        objects.append(ObjectTrack(f"O{j:02d}", kind is target_kind, boxes, props))
    return objects


def _gen_scene(cfg: GenConfig, scene_id: str, rng: np.random.Generator) -> SceneRecord:
    template = SceneRecord(
        scene_id=scene_id,
        pause_time=cfg.pause_time,
        vanishing_point=cfg.vanishing_point,
        pixels_per_degree=cfg.pixels_per_degree,
        objects=(),
        window_len=cfg.window_len,
        frame_rate=cfg.frame_rate,
        regions=_regions(),
    )
    objects = _gen_objects(cfg, rng, frame_times(template))
    scene = dataclasses.replace(template, objects=tuple(objects))
    annotated = []
    for obj in scene.objects:
        change = derive_area_change(obj, scene)
        props = dataclasses.replace(obj.properties, area_change=change)
        annotated.append(dataclasses.replace(obj, properties=props))
    return dataclasses.replace(scene, objects=tuple(annotated))


def _salience(cfg: GenConfig, scene: SceneRecord, box_frames) -> np.ndarray:
    vx, vy = scene.vanishing_point
    values = []
    for obj in scene.objects:
        box, _ = box_frames[obj.object_id].pause_box()
        cx, cy = (box[0] + box[2]) / 2, (box[1] + box[3]) / 2
        values.append(cfg.salience(obj.properties, math.hypot(cx - vx, cy - vy)))
    return np.array(values)


def _gen_gaze(
    cfg: GenConfig,
    rng: np.random.Generator,
    participant: str,
    scene: SceneRecord,
    box_frames,
    salience: np.ndarray,
    background_prob: float,
) -> GazeTrack:
    frames = frame_times(scene)
    n = len(frames)
    boxes = np.stack([box_frames[o.object_id].boxes for o in scene.objects])
    visible = np.stack([box_frames[o.object_id].ok for o in scene.objects])
    centers_x = (boxes[:, :, 0] + boxes[:, :, 2]) / 2
    centers_y = (boxes[:, :, 1] + boxes[:, :, 3]) / 2
    weights = np.exp(salience - salience.max())

    x = np.empty(n)
    y = np.empty(n)
    position = np.array([rng.uniform(*SCREEN_X), rng.uniform(*SCREEN_Y)])
    i = 0
    while i < n:
        duration = rng.lognormal(math.log(cfg.fixation_median), cfg.fixation_sigma)
        length = max(1, int(round(duration * cfg.frame_rate)))
        candidates = np.flatnonzero(visible[:, i])
        if len(candidates) == 0 or rng.random() < background_prob:
            target = None
            point = np.array([rng.uniform(*SCREEN_X), rng.uniform(*SCREEN_Y)])
        else:
            p = weights[candidates] / weights[candidates].sum()
            target = int(candidates[rng.choice(len(candidates), p=p)])
            point = np.array([centers_x[target, i], centers_y[target, i]])
        saccade = min(cfg.saccade_frames, n - i)
        for s in range(saccade):
            alpha = (s + 1) / (cfg.saccade_frames + 1)
            x[i + s], y[i + s] = position + alpha * (point - position)
        i += saccade
        stop = min(n, i + length)
        if target is None:
            x[i:stop] = point[0] + rng.normal(0, cfg.pursuit_noise / 2, stop - i)
            y[i:stop] = point[1] + rng.normal(0, cfg.pursuit_noise / 2, stop - i)
        else:
            # smooth pursuit of the box center, holding still once it vanishes
            cx = pd.Series(centers_x[target, i:stop]).ffill().fillna(point[0])
            cy = pd.Series(centers_y[target, i:stop]).ffill().fillna(point[1])
            x[i:stop] = cx.to_numpy() + rng.normal(0, cfg.pursuit_noise, stop - i)
            y[i:stop] = cy.to_numpy() + rng.normal(0, cfg.pursuit_noise, stop - i)
        if stop > i:
            position = np.array([x[stop - 1], y[stop - 1]])
        i = stop
    valid = rng.random(n) >= cfg.invalid_rate
    return GazeTrack(participant, scene.scene_id, frames, x, y, valid)


def _oracle_rows(
    cfg: GenConfig,
    gaze: GazeTrack,
    scene: SceneRecord,
    box_frames,
    salience: np.ndarray,
    noise: np.random.Generator,
) -> List[Dict[str, Any]]:
    gaze_frames = GazeFrames.build(gaze, scene)
    period = scene.frame_period
    objects = list(scene.objects)
    runs, dwell, recency = [], [], []
    for obj in objects:
        d = _frame_distances(gaze_frames, box_frames[obj.object_id])
        runs.append(float(fixation_time(d, cfg.fixation_radius, period)[0]))
        with np.errstate(invalid="ignore"):
            within = d < cfg.fixation_radius
        dwell.append(int(within.sum()) * period)
        hits = np.flatnonzero(within)
        if len(hits):
            recency.append(-(scene.pause_time - gaze_frames.times[hits[-1]]))
        else:
            recency.append(-cfg.window_len)
    fixated = np.array(runs) > cfg.fixation_ms / 1000.0
    key = salience + cfg.recency_weight * np.array(recency)
    ids = [obj.object_id for obj in objects]

    def order_key(j):
        return (not fixated[j], -(key[j] if fixated[j] else salience[j]), ids[j])

    order = sorted(range(len(objects)), key=order_key)
    rank = np.empty(len(objects), dtype=int)
    rank[order] = np.arange(1, len(objects) + 1)
    capacity = math.inf if cfg.capacity is None else cfg.capacity
    pre = fixated & (rank <= capacity)
    # one draw per object whatever the noise rate
    flips = noise.random(len(objects)) < cfg.label_noise
    return [
        {
            "participant": gaze.participant_id,
            "scene": scene.scene_id,
            "object": obj.object_id,
            "is_target": obj.is_target,
            "fixated": bool(fixated[j]),
            "fixation_time": runs[j],
            "dwell": dwell[j],
            "salience": float(salience[j]),
            "rank": int(rank[j]),
            "pre_label": bool(pre[j]),
            "label": bool(pre[j] != flips[j]),
        }
        for j, obj in enumerate(objects)
    ]


def _scene_work(
    cfg: GenConfig, index: int, seq: np.random.SeedSequence, background_prob: float
):
    scene_seq, *participant_seqs = seq.spawn(1 + cfg.n_participants)
    scene = _gen_scene(cfg, f"S{index:02d}", np.random.default_rng(scene_seq))
    box_frames = {obj.object_id: BoxFrames.build(obj, scene) for obj in scene.objects}
    salience = _salience(cfg, scene, box_frames)
    gaze, rows = [], []
    for p, p_seq in enumerate(participant_seqs):
        gaze_seq, noise_seq = p_seq.spawn(2)
        track = _gen_gaze(
            cfg,
            np.random.default_rng(gaze_seq),
            f"P{p:02d}",
            scene,
            box_frames,
            salience,
            background_prob,
        )
        gaze.append(track)
        noise = np.random.default_rng(noise_seq)
        rows.extend(_oracle_rows(cfg, track, scene, box_frames, salience, noise))
    return scene, gaze, rows


def _generate(cfg: GenConfig, background_prob: float, threads: int):
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.n_scenes)

    def work(item):
        index, seq = item
        return _scene_work(cfg, index, seq, background_prob)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(executor.map(work, enumerate(seqs)))
    scenes = [scene for scene, _, _ in results]
    gaze = [track for _, tracks, _ in results for track in tracks]
    frame = pd.DataFrame(
        [row for _, _, rows in results for row in rows], columns=list(ORACLE_COLUMNS)
    )
    frame = frame.sort_values(["participant", "scene", "object"], kind="mergesort")
    trace = OracleTrace(frame.reset_index(drop=True))
    labels = [
        AwarenessLabel(row.participant, row.scene, row.object, bool(row.label))
        for row in trace.targets().itertuples(index=False)
    ]
    return Dataset(tuple(scenes), tuple(gaze), tuple(labels)), trace


def tune_background(cfg: GenConfig, threads: int = 1, steps: int = 12) -> float:
    """Background gaze probability bringing the target negative share near
    ``cfg.target_negative_share``, by bisection"""
    eps = cfg.label_noise
    goal = (cfg.target_negative_share - eps) / (1 - 2 * eps)
    low, high = 0.0, 0.95
    for _ in range(steps):
        mid = (low + high) / 2
        _, trace = _generate(cfg, mid, threads)
        negative = 1.0 - float(trace.targets()["pre_label"].mean())
        if negative < goal:
            low = mid
        else:
            high = mid
    logger.info("Tuned background gaze probability to %.4f", (low + high) / 2)
    return (low + high) / 2


def gen_dataset(cfg: GenConfig, threads: int = 1) -> Tuple[Dataset, OracleTrace]:
    """Generate a dataset and its oracle; a pure function of ``cfg``"""
    start_time = datetime.now()
    background_prob = cfg.background_prob
    if cfg.target_negative_share is not None:
        background_prob = tune_background(cfg, threads)
    ds, trace = _generate(cfg, background_prob, threads)
    logger.info(
        "Generated %s scenes, %s gaze tracks and %s labels in %s",
        len(ds.scenes),
        len(ds.gaze),
        len(ds.labels),
        datetime.now() - start_time,
    )
    return ds, trace


def oracle_stats(trace: OracleTrace) -> Dict[str, Any]:
    """Label balance, flip rate and dwell summary over the target rows"""
    targets = trace.targets()
    if len(targets) == 0:
        raise ConfigError("oracle trace has no target row")
    dwell = targets["dwell"]
    fixated = targets[targets["fixated"]]
    return {
        "rows": len(targets),
        "negative_share": float(1 - targets["label"].mean()),
        "pre_negative_share": float(1 - targets["pre_label"].mean()),
        "flip_rate": float((targets["label"] != targets["pre_label"]).mean()),
        "fixated_share": float(targets["fixated"].mean()),
        "aware_rate_by_rank": {
            str(rank): float(group["label"].mean())
            for rank, group in fixated.groupby("rank")
        },
        "dwell": {
            "min": float(dwell.min()),
            "mean": float(dwell.mean()),
            "max": float(dwell.max()),
            "histogram": np.histogram(dwell, bins=10, range=(0.0, 10.0))[0].tolist(),
        },
    }


def write_oracle(trace: OracleTrace, path: Union[str, Path]) -> None:
    frame = trace.frame.copy()
    for column in ("is_target", "fixated", "pre_label", "label"):
        frame[column] = frame[column].astype(int)
    frame.to_csv(path, index=False, float_format="%.17g")


def read_oracle(path: Union[str, Path]) -> OracleTrace:
    frame = pd.read_csv(
        path,
        dtype={"participant": str, "scene": str, "object": str},
        float_precision="round_trip",
    )
    for column in ("is_target", "fixated", "pre_label", "label"):
        frame[column] = frame[column].astype(bool)
    return OracleTrace(frame)
