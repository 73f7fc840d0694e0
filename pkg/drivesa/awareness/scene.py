# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Domain types for driving scenes, traffic objects, gaze and awareness labels.

All geometry is expressed in degrees of visual angle. Pixel inputs are
converted once, at ingestion time, with the per-scene ``pixels_per_degree``
calibration.
"""

from dataclasses import dataclass, field
from enum import Enum
import math
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

Point = Tuple[float, float]
Box = Tuple[float, float, float, float]

# box columns: t, xmin, ymin, xmax, ymax
BOX_COLUMNS = ("t", "xmin", "ymin", "xmax", "ymax")


class DatasetError(ValueError):
    """A dataset violates its schema or one of its invariants"""

    def __init__(self, message, *, path=None, line=None, field=None):
        super().__init__(message)
        self.message = message
        self.path = path
        self.line = line
        self.field = field

    def __str__(self):
        location = ""
        if self.path is not None:
            location = str(self.path)
            if self.line is not None:
                location += f":{self.line}"
            location += ": "
        if self.field is not None:
            location += f"{self.field}: "
        return location + self.message


class ReferentialIntegrityError(DatasetError):
    """An identifier references a scene, object or participant that does not exist"""


class TimestampError(DatasetError):
    """Sample or box timestamps are not strictly increasing, off the frame rate,
    or miss the analysis window"""


class LabelCountError(DatasetError):
    """A (participant, scene, target) has no awareness label"""


class ObjectKind(Enum):
    PEDESTRIAN = "pedestrian"
    VEHICLE = "vehicle"

    def __str__(self):
        return self.value


class Contrast(Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    def __str__(self):
        return self.value


class Movement(Enum):
    STATIC = "static"
    SLOW = "slow"
    MEDIUM = "medium"
    HIGH = "high"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ObjectProperties:
    """Annotated properties of a traffic participant.

    ``light_green`` is False for both red and unknown traffic light states.
    """

    kind: ObjectKind
    relevance: bool
    light_green: bool
    contrast: Contrast
    movement: Movement
    area_change: bool

    def to_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind.value,
            "relevance": self.relevance,
            "light_green": self.light_green,
            "contrast": self.contrast.value,
            "movement": self.movement.value,
            "area_change": self.area_change,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, object]) -> "ObjectProperties":
        enums = {"kind": ObjectKind, "contrast": Contrast, "movement": Movement}
        values: Dict[str, object] = {}
        for name in (
            "kind",
            "relevance",
            "light_green",
            "contrast",
            "movement",
            "area_change",
        ):
            if name not in d:
                raise DatasetError("missing property", field=name)
        for name, enum in enums.items():
            try:
                values[name] = enum(d[name])
            except ValueError:
                choices = ", ".join(e.value for e in enum)
                raise DatasetError(
                    f"invalid value {d[name]!r} (expected one of {choices})",
                    field=name,
                ) from None
        for name in ("relevance", "light_green", "area_change"):
            value = d[name]
            if not isinstance(value, bool):
                raise DatasetError(f"expected a boolean, got {value!r}", field=name)
            values[name] = value
        return cls(**values)  # type: ignore[arg-type]


@dataclass(frozen=True)
class RegionPolygon:
    """A target-area boundary, used to derive ``OP_change``"""

    region_id: str
    vertices: Tuple[Point, ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise DatasetError(
                f"region {self.region_id!r} needs at least 3 vertices",
                field="vertices",
            )


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ObjectTrack:
    """Per-frame bounding boxes of one traffic participant.

    ``boxes`` is an ``(n, 5)`` array with columns ``t, xmin, ymin, xmax, ymax``.
    """

    object_id: str
    is_target: bool
    boxes: np.ndarray
    properties: ObjectProperties

    def __post_init__(self):
        boxes = _frozen_array(self.boxes).reshape(-1, 5)
        object.__setattr__(self, "boxes", boxes)
        if len(boxes) == 0:
            raise DatasetError(f"object {self.object_id!r} has no box", field="boxes")
        if np.any(~np.isfinite(boxes)):
            raise DatasetError(
                f"object {self.object_id!r} has non-finite box values", field="boxes"
            )
        if np.any(boxes[:, 1] > boxes[:, 3]) or np.any(boxes[:, 2] > boxes[:, 4]):
            raise DatasetError(
                f"object {self.object_id!r} has a box with min > max", field="boxes"
            )
        if np.any(np.diff(boxes[:, 0]) <= 0):
            raise TimestampError(
                f"object {self.object_id!r} box times are not strictly increasing",
                field="boxes",
            )

    @property
    def kind(self) -> ObjectKind:
        return self.properties.kind

    @property
    def times(self) -> np.ndarray:
        return self.boxes[:, 0]


@dataclass(frozen=True, eq=False)
class GazeTrack:
    """Registered gaze samples of one participant for one scene"""

    participant_id: str
    scene_id: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        for name in ("t", "x", "y"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        object.__setattr__(self, "valid", _frozen_array(self.valid, dtype=bool))
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.valid) == n):
            raise DatasetError(
                f"gaze track {self.participant_id}/{self.scene_id} has columns "
                "of different lengths"
            )
        if np.any(np.diff(self.t) <= 0):
            raise TimestampError(
                f"gaze track {self.participant_id}/{self.scene_id} timestamps are "
                "not strictly increasing",
                field="t",
            )

    def __len__(self):
        return len(self.t)

    @classmethod
    def empty(cls, participant_id: str, scene_id: str) -> "GazeTrack":
        return cls(participant_id, scene_id, [], [], [], [])


@dataclass(frozen=True, eq=False)
class SceneRecord:
    """One pause: timing, calibration, vanishing point, objects and regions"""

    scene_id: str
    pause_time: float
    vanishing_point: Point
    pixels_per_degree: float
    objects: Tuple[ObjectTrack, ...]
    window_len: float = 10.0
    frame_rate: float = 60.0
    regions: Optional[Tuple[RegionPolygon, ...]] = None
    _index: Dict[str, ObjectTrack] = field(
        default_factory=dict, init=False, repr=False
    )

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.regions is not None:
            object.__setattr__(self, "regions", tuple(self.regions))
        for name in ("window_len", "frame_rate", "pixels_per_degree"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DatasetError(
                    f"scene {self.scene_id!r}: must be positive, got {value!r}",
                    field=name,
                )
        index = self._index
        for obj in self.objects:
            if obj.object_id in index:
                raise DatasetError(
                    f"scene {self.scene_id!r}: duplicate object id {obj.object_id!r}",
                    field="object_id",
                )
            index[obj.object_id] = obj
        t_start, t_end = window_of(self)
        frames = frame_times(self)
        for obj in self.objects:
            times = obj.times
            if not np.any((times > t_start) & (times <= t_end)):
                raise DatasetError(
                    f"scene {self.scene_id!r}: object {obj.object_id!r} has no box "
                    "inside the analysis window",
                    field="boxes",
                )
            # same alignment as feature extraction
            if not np.any(align_to_frames(times, frames, self.frame_period) >= 0):
                raise DatasetError(
                    f"scene {self.scene_id!r}: object {obj.object_id!r} has no box "
                    "aligned to a frame of the analysis window",
                    field="boxes",
                )

    def object(self, object_id: str) -> ObjectTrack:
        try:
            return self._index[object_id]
        except KeyError:
            raise ReferentialIntegrityError(
                f"scene {self.scene_id!r} has no object {object_id!r}",
                field="object",
            ) from None

    def has_object(self, object_id: str) -> bool:
        return object_id in self._index

    @property
    def frame_period(self) -> float:
        return 1.0 / self.frame_rate

    @property
    def targets(self) -> List[ObjectTrack]:
        return [obj for obj in self.objects if obj.is_target]


@dataclass(frozen=True)
class AwarenessLabel:
    participant_id: str
    scene_id: str
    object_id: str
    aware: bool

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.participant_id, self.scene_id, self.object_id)


@dataclass(frozen=True, eq=False)
class Dataset:
    scenes: Tuple[SceneRecord, ...]
    gaze: Tuple[GazeTrack, ...]
    labels: Tuple[AwarenessLabel, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "scenes", tuple(sorted(self.scenes, key=lambda s: s.scene_id))
        )
        object.__setattr__(
            self,
            "gaze",
            tuple(sorted(self.gaze, key=lambda g: (g.participant_id, g.scene_id))),
        )
        object.__setattr__(
            self, "labels", tuple(sorted(self.labels, key=lambda lb: lb.key))
        )

    def scene(self, scene_id: str) -> SceneRecord:
        for scene in self.scenes:
            if scene.scene_id == scene_id:
                return scene
        raise ReferentialIntegrityError(f"unknown scene {scene_id!r}", field="scene")

    @property
    def scene_ids(self) -> List[str]:
        return [scene.scene_id for scene in self.scenes]

    @property
    def participants(self) -> List[str]:
        return sorted(
            {g.participant_id for g in self.gaze}
            | {lb.participant_id for lb in self.labels}
        )

    def gaze_index(self) -> Dict[Tuple[str, str], GazeTrack]:
        return {(g.participant_id, g.scene_id): g for g in self.gaze}

    def gaze_for(self, participant_id: str, scene_id: str) -> GazeTrack:
        for g in self.gaze:
            if g.participant_id == participant_id and g.scene_id == scene_id:
                return g
        return GazeTrack.empty(participant_id, scene_id)

    def label_index(self) -> Dict[Tuple[str, str, str], bool]:
        return {lb.key: lb.aware for lb in self.labels}

    def iter_objects(self) -> Iterator[Tuple[SceneRecord, ObjectTrack]]:
        for scene in self.scenes:
            for obj in sorted(scene.objects, key=lambda o: o.object_id):
                yield scene, obj


def px_to_deg(p: Sequence[float], calib: float) -> Point:
    """Convert a pixel coordinate pair to degrees of visual angle

    >>> px_to_deg((60, -30), 30)
    (2.0, -1.0)
    """
    if not calib > 0:
        raise DatasetError(
            f"calibration must be positive, got {calib!r}", field="pixels_per_degree"
        )
    return (p[0] / calib, p[1] / calib)


def deg_to_px(p: Sequence[float], calib: float) -> Point:
    if not calib > 0:
        raise DatasetError(
            f"calibration must be positive, got {calib!r}", field="pixels_per_degree"
        )
    return (p[0] * calib, p[1] * calib)


def window_of(scene: SceneRecord) -> Tuple[float, float]:
    """Analysis window ``(t_start, t_end)``; a frame at time t is inside iff
    ``t_start < t <= t_end``."""
    return (scene.pause_time - scene.window_len, scene.pause_time)


def frame_times(scene: SceneRecord) -> np.ndarray:
    """Times of the frames of the analysis window, the last one being the
    pause frame"""
    n_frames = int(round(scene.window_len * scene.frame_rate))
    offsets = np.arange(n_frames - 1, -1, -1, dtype=float) / scene.frame_rate
    return scene.pause_time - offsets


def align_to_frames(times: np.ndarray, frames: np.ndarray, period: float) -> np.ndarray:
    """Index of the sample nearest to each frame, or -1 when no sample lies
    within half a frame period"""
    result = np.full(len(frames), -1, dtype=np.int64)
    if len(times) == 0:
        return result
    right = np.clip(np.searchsorted(times, frames), 0, len(times) - 1)
    left = np.clip(right - 1, 0, len(times) - 1)
    use_left = np.abs(times[left] - frames) <= np.abs(times[right] - frames)
    nearest = np.where(use_left, left, right)
    matched = np.abs(times[nearest] - frames) < period / 2
    result[matched] = nearest[matched]
    return result

