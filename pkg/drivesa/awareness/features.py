# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Per (participant, scene, object) feature extraction.

Features are aggregated over the frames of the analysis window only. Gaze
features use the co-visible frames, i.e. frames where the gaze sample is valid
and the object has a bounding box; frames outside the recording are simply
absent.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .scene import (
    Box,
    Contrast,
    Dataset,
    GazeTrack,
    Movement,
    ObjectKind,
    ObjectProperties,
    ObjectTrack,
    Point,
    SceneRecord,
    align_to_frames,
    frame_times,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_DISTANCE_DEG = 60.0

FAMILIES = ("gaze_point", "object_spatial", "object_property", "sensory")

GAZE_POINT_COLUMNS = ("G_pause", "G_min", "G_average")
OBJECT_SPATIAL_COLUMNS = ("OS_proximity", "OS_duration", "OS_size", "OS_density")
# order of object_property_features()
OBJECT_PROPERTY_COLUMNS = (
    "OP_type",
    "OP_relevance",
    "OP_light",
    "OP_change",
    "OP_contrast_low",
    "OP_contrast_med",
    "OP_contrast_high",
    "OP_movement_static",
    "OP_movement_slow",
    "OP_movement_med",
    "OP_movement_high",
)
SENSORY_FEATURES = ("elapse", "dwell", "average")

KEY_COLUMNS = ("participant", "scene", "object")
INFO_COLUMNS = ("kind", "is_target", "raw_height")
FLAG_COLUMNS = (
    "flag_no_covisible",
    "flag_gaze_pause_fallback",
    "flag_box_pause_fallback",
)

_CONTRAST_ORDER = (Contrast.LOW, Contrast.MEDIUM, Contrast.HIGH)
_MOVEMENT_ORDER = (Movement.STATIC, Movement.SLOW, Movement.MEDIUM, Movement.HIGH)


class FeatureError(ValueError):
    """A feature cannot be computed for the given inputs"""


@dataclass(frozen=True)
class SensoryRadii:
    """Radii (degrees) of the fovea, parafovea, perifovea and macula"""

    theta: Tuple[float, ...] = (2.5, 4.1, 9.1, 15.0)

    def __post_init__(self):
        theta = tuple(float(r) for r in self.theta)
        if not theta or any(r <= 0 for r in theta):
            raise FeatureError(f"radii must be positive, got {theta!r}")
        if any(b <= a for a, b in zip(theta, theta[1:])):
            raise FeatureError(f"radii must be strictly increasing, got {theta!r}")
        object.__setattr__(self, "theta", theta)

    def __iter__(self):
        return iter(self.theta)

    def __len__(self):
        return len(self.theta)


DEFAULT_RADII = SensoryRadii()


def radius_label(radius: float) -> str:
    return f"{radius:g}"


def sensory_columns(radii: SensoryRadii = DEFAULT_RADII) -> List[str]:
    return [
        f"HV_{name}_{radius_label(r)}" for r in radii for name in SENSORY_FEATURES
    ]


def feature_columns(radii: SensoryRadii = DEFAULT_RADII) -> List[str]:
    """Feature columns, in the order of the CSV and of the PCA reports"""
    return [
        "G_pause",
        "G_min",
        "G_average",
        "OS_proximity",
        "OS_duration",
        "OP_relevance",
        "OP_light",
        "OS_size",
        "OS_density",
        "OP_type",
        "OP_contrast_low",
        "OP_contrast_med",
        "OP_contrast_high",
        "OP_movement_static",
        "OP_movement_slow",
        "OP_movement_med",
        "OP_movement_high",
        "OP_change",
        *sensory_columns(radii),
    ]


def family_columns(family: str, radii: SensoryRadii = DEFAULT_RADII) -> List[str]:
    if family == "gaze_point":
        return list(GAZE_POINT_COLUMNS)
    elif family == "object_spatial":
        return list(OBJECT_SPATIAL_COLUMNS)
    elif family == "object_property":
        return list(OBJECT_PROPERTY_COLUMNS)
    elif family == "sensory":
        return sensory_columns(radii)
    raise FeatureError(f"unknown feature family: {family!r}")


def gaze_box_distance(g: Point, box: Box) -> float:
    """Distance from a gaze point to the nearest edge of a box; 0 inside it.

    ``box`` is ``(xmin, ymin, xmax, ymax)``.

    >>> gaze_box_distance((1.0, 1.0), (0.0, 0.0, 2.0, 2.0))
    0.0
    >>> gaze_box_distance((10.0, 0.0), (0.0, -1.0, 5.0, 1.0))
    5.0
    """
    gx, gy = g
    xmin, ymin, xmax, ymax = box
    dx = max(xmin - gx, 0.0, gx - xmax)
    dy = max(ymin - gy, 0.0, gy - ymax)
    return math.hypot(dx, dy)


def box_distances(gx: np.ndarray, gy: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """Vectorized :func:`gaze_box_distance` over aligned gaze points and boxes"""
    zero = np.zeros_like(gx)
    dx = np.maximum.reduce([boxes[:, 0] - gx, zero, gx - boxes[:, 2]])
    dy = np.maximum.reduce([boxes[:, 1] - gy, zero, gy - boxes[:, 3]])
    return np.hypot(dx, dy)


@dataclass(frozen=True)
class GazeFrames:
    """Gaze samples aligned to the frames of a scene's analysis window"""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    ok: np.ndarray

    @classmethod
    def build(cls, gaze: GazeTrack, scene: SceneRecord) -> "GazeFrames":
        frames = frame_times(scene)
        idx = align_to_frames(gaze.t, frames, scene.frame_period)
        ok = idx >= 0
        safe = np.where(ok, idx, 0)
        if len(gaze):
            ok &= gaze.valid[safe]
            x = np.where(ok, gaze.x[safe], np.nan)
            y = np.where(ok, gaze.y[safe], np.nan)
        else:
            x = y = np.full(len(frames), np.nan)
        return cls(frames, x, y, ok)


@dataclass(frozen=True)
class BoxFrames:
    """Bounding boxes of an object aligned to the frames of the analysis window"""

    times: np.ndarray
    boxes: np.ndarray
    ok: np.ndarray

    @classmethod
    def build(cls, obj: ObjectTrack, scene: SceneRecord) -> "BoxFrames":
        frames = frame_times(scene)
        idx = align_to_frames(obj.times, frames, scene.frame_period)
        ok = idx >= 0
        boxes = np.full((len(frames), 4), np.nan)
        boxes[ok] = obj.boxes[idx[ok], 1:]
        return cls(frames, boxes, ok)

    def pause_box(self) -> Tuple[Optional[np.ndarray], bool]:
        """Box at the pause frame, falling back to the last visible frame.

        Returns the box (None if never visible) and whether the fallback was
        used.
        """
        visible = np.flatnonzero(self.ok)
        if len(visible) == 0:
            return None, False
        last = visible[-1]
        return self.boxes[last], last != len(self.ok) - 1


@dataclass(frozen=True)
class CovisibleDistances:
    """Gaze-to-box distances over the co-visible frames of the window"""

    times: np.ndarray
    distances: np.ndarray
    at_pause: bool
    t_end: float
    period: float

    @classmethod
    def build(cls, gaze_frames: GazeFrames, box_frames: BoxFrames, scene):
        covisible = gaze_frames.ok & box_frames.ok
        distances = box_distances(
            gaze_frames.x[covisible],
            gaze_frames.y[covisible],
            box_frames.boxes[covisible],
        )
        return cls(
            times=gaze_frames.times[covisible],
            distances=distances,
            at_pause=bool(covisible[-1]) if len(covisible) else False,
            t_end=scene.pause_time,
            period=scene.frame_period,
        )

    def __len__(self):
        return len(self.distances)


def _covisible(gaze: GazeTrack, obj: ObjectTrack, scene: SceneRecord):
    return CovisibleDistances.build(
        GazeFrames.build(gaze, scene), BoxFrames.build(obj, scene), scene
    )


def _gaze_point(
    cov: CovisibleDistances, max_distance_deg: float
) -> Tuple[float, float, float]:
    if len(cov) == 0:
        return (max_distance_deg, max_distance_deg, max_distance_deg)
    d = cov.distances
    return (float(d[-1]), float(d.min()), float(d.mean()))


def _sensory(
    cov: CovisibleDistances,
    radii: SensoryRadii,
    window_len: float,
    max_distance_deg: float,
) -> Tuple[float, ...]:
    values: List[float] = []
    for radius in radii:
        if len(cov) == 0:
            values.extend([window_len, 0.0, max_distance_deg])
            continue
        within = cov.distances < radius
        count = int(np.count_nonzero(within))
        if count:
            elapse = cov.t_end - float(cov.times[within][-1])
            average = float(cov.distances[within].mean())
        else:
            elapse = window_len
            average = float(cov.distances.mean())
        values.extend([elapse, count * cov.period, average])
    return tuple(values)


def gaze_point_features(
    gaze: GazeTrack,
    obj: ObjectTrack,
    scene: SceneRecord,
    max_distance_deg: float = DEFAULT_MAX_DISTANCE_DEG,
) -> Tuple[float, float, float]:
    """``(G_pause, G_min, G_average)`` in degrees.

    Objects never co-visible with a valid gaze sample get ``max_distance_deg``
    for all three values.
    """
    return _gaze_point(_covisible(gaze, obj, scene), max_distance_deg)


def sensory_features(
    gaze: GazeTrack,
    obj: ObjectTrack,
    scene: SceneRecord,
    radii: SensoryRadii = DEFAULT_RADII,
    max_distance_deg: float = DEFAULT_MAX_DISTANCE_DEG,
) -> Tuple[float, ...]:
    """``(HV_elapse, HV_dwell, HV_average)`` for each radius, flattened"""
    return _sensory(
        _covisible(gaze, obj, scene), radii, scene.window_len, max_distance_deg
    )


def _box_center(box) -> Tuple[float, float]:
    return ((box[0] + box[2]) / 2, (box[1] + box[3]) / 2)


def _spatial(
    box_frames: BoxFrames,
    kind: ObjectKind,
    scene: SceneRecord,
    density: int,
    ref_heights: Mapping[str, float],
) -> Tuple[float, float, float, float]:
    box, _ = box_frames.pause_box()
    # SceneRecord guarantees a box aligned to some frame
    assert box is not None, scene.scene_id
    try:
        ref = ref_heights[kind.value]
    except KeyError:
        raise FeatureError(
            f"missing reference height for kind {kind.value!r}"
        ) from None
    cx, cy = _box_center(box)
    vx, vy = scene.vanishing_point
    proximity = math.hypot(cx - vx, cy - vy)
    duration = min(
        int(np.count_nonzero(box_frames.ok)) * scene.frame_period, scene.window_len
    )
    size = float(box[3] - box[1]) / ref
    return (proximity, duration, size, float(density))


def pause_density(scene: SceneRecord) -> int:
    """Number of objects of the scene visible at the pause frame"""
    return sum(1 for obj in scene.objects if BoxFrames.build(obj, scene).ok[-1])


def object_spatial_features(
    obj: ObjectTrack, scene: SceneRecord, ref_heights: Mapping[str, float]
) -> Tuple[float, float, float, float]:
    """``(OS_proximity, OS_duration, OS_size, OS_density)``"""
    return _spatial(
        BoxFrames.build(obj, scene),
        obj.kind,
        scene,
        pause_density(scene),
        ref_heights,
    )


def object_property_features(p: ObjectProperties) -> Tuple[float, ...]:
    """Binary and one-hot encoding of the annotated properties.

    >>> from drivesa.awareness.scene import ObjectKind, Contrast, Movement
    >>> props = ObjectProperties(
    ...     ObjectKind.PEDESTRIAN, True, True, Contrast.HIGH, Movement.SLOW, False
    ... )
    >>> object_property_features(props)
    (1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0)
    """
    return (
        1.0 if p.kind is ObjectKind.PEDESTRIAN else 0.0,
        float(p.relevance),
        float(p.light_green),
        float(p.area_change),
        *(1.0 if p.contrast is c else 0.0 for c in _CONTRAST_ORDER),
        *(1.0 if p.movement is m else 0.0 for m in _MOVEMENT_ORDER),
    )


def points_in_polygon(
    px: np.ndarray, py: np.ndarray, vertices: Sequence[Point]
) -> np.ndarray:
    """Even-odd ray casting test of many points against one polygon"""
    inside = np.zeros(len(px), dtype=bool)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > py) != (y2 > py)
        x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < x_cross)
    return inside


def region_labels(scene: SceneRecord, cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
    """Index of the first region containing each point, -1 for none"""
    labels = np.full(len(cx), -1, dtype=np.int64)
    for i, region in enumerate(scene.regions or ()):
        hit = (labels < 0) & points_in_polygon(cx, cy, region.vertices)
        labels[hit] = i
    return labels


def derive_area_change(
    obj: ObjectTrack, scene: SceneRecord, horizon: float = 1.0
) -> bool:
    """Whether the box center changes target area during the last ``horizon``
    seconds before the pause, sampled per frame"""
    if not scene.regions:
        raise FeatureError(
            f"scene {scene.scene_id!r} has no regions; use the annotated area_change"
        )
    box_frames = BoxFrames.build(obj, scene)
    recent = box_frames.ok & (
        box_frames.times >= scene.pause_time - horizon - scene.frame_period / 2
    )
    boxes = box_frames.boxes[recent]
    if len(boxes) < 2:
        return False
    cx, cy = _box_center(boxes.T)
    labels = region_labels(scene, cx, cy)
    return bool(np.any(labels != labels[0]))


def reference_heights_from_scenes(
    scenes: Sequence[SceneRecord],
) -> Dict[str, float]:
    """Per-kind median of the pause-frame box heights"""
    heights: Dict[str, List[float]] = {}
    for scene in scenes:
        for obj in scene.objects:
            box, _ = BoxFrames.build(obj, scene).pause_box()
            if box is not None:
                heights.setdefault(obj.kind.value, []).append(float(box[3] - box[1]))
    return _median_heights(heights)


def _median_heights(heights: Mapping[str, Sequence[float]]) -> Dict[str, float]:
    everything = [h for values in heights.values() for h in values]
    overall = float(np.median(everything)) if everything else 1.0
    result = {}
    for kind in ObjectKind:
        values = heights.get(kind.value, [])
        if values:
            result[kind.value] = float(np.median(values))
        else:
            logger.warning(
                "No %s in the reference split, using the overall median height %s",
                kind.value,
                overall,
            )
            result[kind.value] = overall
        if not result[kind.value] > 0:
            result[kind.value] = 1.0
    return result


class FeatureTable:
    """Feature rows keyed by (participant, scene, object).

    Besides the keys and the feature columns, the underlying frame carries the
    object kind, whether the object is a labelled target, the raw pause-frame
    box height (to rescale ``OS_size``) and the degenerate-input flags.
    """

    def __init__(self, frame: pd.DataFrame, radii: SensoryRadii = DEFAULT_RADII):
        self.radii = radii
        self.columns = feature_columns(radii)
        missing = [
            c
            for c in (*KEY_COLUMNS, *INFO_COLUMNS, *self.columns, *FLAG_COLUMNS)
            if c not in frame.columns
        ]
        if missing:
            raise FeatureError(f"feature table lacks columns: {', '.join(missing)}")
        self.frame = frame.sort_values(list(KEY_COLUMNS), kind="mergesort")
        self.frame = self.frame.reset_index(drop=True)

    def __len__(self):
        return len(self.frame)

    def keys(self) -> List[Tuple[str, str, str]]:
        return list(
            zip(self.frame["participant"], self.frame["scene"], self.frame["object"])
        )

    def matrix(self, columns: Sequence[str]) -> np.ndarray:
        missing = [c for c in columns if c not in self.frame.columns]
        if missing:
            raise KeyError(f"missing feature columns: {', '.join(missing)}")
        return self.frame[list(columns)].to_numpy(dtype=float)

    def _subset(self, mask) -> "FeatureTable":
        return FeatureTable(self.frame[mask].copy(), self.radii)

    def select_scenes(self, scene_ids) -> "FeatureTable":
        return self._subset(self.frame["scene"].isin(list(scene_ids)))

    def targets(self) -> "FeatureTable":
        return self._subset(self.frame["is_target"].astype(bool))

    @property
    def scene_ids(self) -> List[str]:
        return sorted(self.frame["scene"].unique())

    def reference_heights(self) -> Dict[str, float]:
        objects = self.frame.drop_duplicates(["scene", "object"])
        heights = {
            kind: list(group["raw_height"])
            for kind, group in objects.groupby("kind", sort=True)
        }
        return _median_heights(heights)

    def with_reference_heights(self, ref: Mapping[str, float]) -> "FeatureTable":
        frame = self.frame.copy()
        try:
            scale = frame["kind"].map(lambda kind: ref[kind])
        except KeyError as e:
            raise FeatureError(f"missing reference height for kind {e.args[0]!r}")
        frame["OS_size"] = frame["raw_height"] / scale.astype(float)
        return FeatureTable(frame, self.radii)

    def report(self) -> Dict[str, int]:
        """Number of rows raising each degenerate-input flag"""
        return {flag: int(self.frame[flag].sum()) for flag in FLAG_COLUMNS}

    def write_csv(self, path: Union[str, Path]) -> None:
        columns = [*KEY_COLUMNS, *INFO_COLUMNS, *self.columns, *FLAG_COLUMNS]
        frame = self.frame[columns].copy()
        for flag in ("is_target", *FLAG_COLUMNS):
            frame[flag] = frame[flag].astype(int)
        frame.to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "FeatureTable":
        frame = pd.read_csv(
            path,
            dtype={"participant": str, "scene": str, "object": str, "kind": str},
            float_precision="round_trip",
        )
        radii = sorted(
            {
                float(c.rsplit("_", 1)[1])
                for c in frame.columns
                if c.startswith("HV_dwell_")
            }
        )
        for flag in ("is_target", *FLAG_COLUMNS):
            frame[flag] = frame[flag].astype(bool)
        return cls(frame, SensoryRadii(tuple(radii)))


def _scene_rows(
    scene: SceneRecord,
    participants: Sequence[str],
    gaze_index: Mapping[Tuple[str, str], GazeTrack],
    radii: SensoryRadii,
    max_distance_deg: float,
    ref_heights: Mapping[str, float],
) -> List[Dict[str, object]]:
    objects = sorted(scene.objects, key=lambda o: o.object_id)
    box_frames = {obj.object_id: BoxFrames.build(obj, scene) for obj in objects}
    density = sum(1 for bf in box_frames.values() if bf.ok[-1])
    static: Dict[str, Dict[str, object]] = {}
    for obj in objects:
        bf = box_frames[obj.object_id]
        box, fallback = bf.pause_box()
        values = dict(
            zip(
                OBJECT_SPATIAL_COLUMNS,
                _spatial(bf, obj.kind, scene, density, ref_heights),
            )
        )
        values.update(
            zip(OBJECT_PROPERTY_COLUMNS, object_property_features(obj.properties))
        )
        values["raw_height"] = float(box[3] - box[1])
        values["flag_box_pause_fallback"] = fallback
        static[obj.object_id] = values

    rows = []
    hv_columns = sensory_columns(radii)
    for participant in participants:
        gaze = gaze_index.get((participant, scene.scene_id))
        if gaze is None:
            logger.debug(
                "No gaze track for participant %s in scene %s",
                participant,
                scene.scene_id,
            )
            gaze = GazeTrack.empty(participant, scene.scene_id)
        gaze_frames = GazeFrames.build(gaze, scene)
        for obj in objects:
            cov = CovisibleDistances.build(
                gaze_frames, box_frames[obj.object_id], scene
            )
            row: Dict[str, object] = {
                "participant": participant,
                "scene": scene.scene_id,
                "object": obj.object_id,
                "kind": obj.kind.value,
                "is_target": obj.is_target,
            }
            row.update(static[obj.object_id])
            row.update(zip(GAZE_POINT_COLUMNS, _gaze_point(cov, max_distance_deg)))
            row.update(
                zip(
                    hv_columns,
                    _sensory(cov, radii, scene.window_len, max_distance_deg),
                )
            )
            row["flag_no_covisible"] = len(cov) == 0
            row["flag_gaze_pause_fallback"] = len(cov) > 0 and not cov.at_pause
            rows.append(row)
    return rows


def extract_all(
    ds: Dataset,
    radii: SensoryRadii = DEFAULT_RADII,
    max_distance_deg: float = DEFAULT_MAX_DISTANCE_DEG,
    ref_heights: Optional[Mapping[str, float]] = None,
    threads: int = 1,
) -> FeatureTable:
    """Feature rows for every (participant, scene, object), targets and
    non-targets alike.

    ``ref_heights`` defaults to the per-kind median over the whole dataset;
    training code rescales ``OS_size`` per split with
    :meth:`FeatureTable.with_reference_heights`.
    """
    if ref_heights is None:
        ref_heights = reference_heights_from_scenes(ds.scenes)
    participants = ds.participants
    gaze_index = ds.gaze_index()

    def work(scene):
        return _scene_rows(
            scene, participants, gaze_index, radii, max_distance_deg, ref_heights
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        chunks = list(executor.map(work, ds.scenes))
    rows = [row for chunk in chunks for row in chunk]
    columns = [*KEY_COLUMNS, *INFO_COLUMNS, *feature_columns(radii), *FLAG_COLUMNS]
    frame = pd.DataFrame(rows, columns=columns)
    table = FeatureTable(frame, radii)
    logger.info(
        "Extracted %s feature rows over %s scenes and %s participants",
        len(table),
        len(ds.scenes),
        len(participants),
    )
    return table
