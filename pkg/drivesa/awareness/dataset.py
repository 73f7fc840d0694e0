# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Dataset directory reader and writer.

Layout::

    manifest.json               scene records (timing, calibration, regions)
    objects.jsonl               one object track per line
    gaze/<participant>/<scene>.csv   header t,x,y,valid
    labels.csv                  header participant,scene,object,aware

Coordinates are declared per scene in ``px`` or ``deg``; everything is
converted to degrees of visual angle on load. The writer always emits degrees.
"""

import dataclasses
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .scene import (
    AwarenessLabel,
    Dataset,
    DatasetError,
    GazeTrack,
    LabelCountError,
    ObjectProperties,
    ObjectTrack,
    ReferentialIntegrityError,
    RegionPolygon,
    SceneRecord,
    TimestampError,
    px_to_deg,
    window_of,
)

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
OBJECTS = "objects.jsonl"
LABELS = "labels.csv"
GAZE_DIR = "gaze"

GAZE_HEADER = ("t", "x", "y", "valid")
LABELS_HEADER = ("participant", "scene", "object", "aware")

# tolerated deviation of the median gaze sample spacing from the frame period
SPACING_JITTER = 0.2

_TRUE = {"1", "true", "True", "TRUE"}
_FALSE = {"0", "false", "False", "FALSE"}


def _require(d: Dict[str, Any], name: str, path, line=None):
    try:
        return d[name]
    except KeyError:
        raise DatasetError("missing field", path=path, line=line, field=name) from None


def _number(value, name, path, line=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DatasetError(
            f"expected a number, got {value!r}", path=path, line=line, field=name
        )
    return float(value)


def _flag(value, name, path, line) -> bool:
    text = str(value).strip()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise DatasetError(
        f"expected 0/1 or true/false, got {value!r}", path=path, line=line, field=name
    )


def _read_csv(path: Path, header: Sequence[str]) -> pd.DataFrame:
    if not path.exists():
        raise DatasetError("missing file", path=path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DatasetError("empty file, expected a header", path=path, line=1)
    if tuple(frame.columns) != tuple(header):
        raise DatasetError(
            f"expected header {','.join(header)}, got {','.join(frame.columns)}",
            path=path,
            line=1,
        )
    return frame


def _floats(frame: pd.DataFrame, name: str, path: Path) -> np.ndarray:
    values = pd.to_numeric(frame[name], errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if len(bad):
        row = int(bad[0])
        raise DatasetError(
            f"expected a finite number, got {frame[name].iloc[row]!r}",
            path=path,
            line=row + 2,
            field=name,
        )
    return values


def _read_manifest(root: Path) -> List[Dict[str, Any]]:
    path = root / MANIFEST
    if not path.exists():
        raise DatasetError("missing file", path=path)
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(
            f"invalid JSON: {e.msg}", path=path, line=e.lineno
        ) from None
    scenes = _require(manifest, "scenes", path)
    if not isinstance(scenes, list) or not scenes:
        raise DatasetError("expected a nonempty list", path=path, field="scenes")
    seen = set()
    for entry in scenes:
        scene_id = str(_require(entry, "scene_id", path))
        if scene_id in seen:
            raise DatasetError(
                f"duplicate scene id {scene_id!r}", path=path, field="scene_id"
            )
        seen.add(scene_id)
        units = entry.get("units", "deg")
        if units not in ("px", "deg"):
            raise DatasetError(
                f"expected 'px' or 'deg', got {units!r}", path=path, field="units"
            )
        calib = _number(
            _require(entry, "pixels_per_degree", path), "pixels_per_degree", path
        )
        if not calib > 0:
            raise DatasetError(
                f"must be positive, got {calib!r}",
                path=path,
                field="pixels_per_degree",
            )
        for name in ("pause_time", "window_len", "frame_rate"):
            if name in entry:
                _number(entry[name], name, path)
        _require(entry, "pause_time", path)
        vp = _require(entry, "vanishing_point", path)
        if not isinstance(vp, list) or len(vp) != 2:
            raise DatasetError(
                "expected an [x, y] pair", path=path, field="vanishing_point"
            )
    return scenes


def _to_deg(entry: Dict[str, Any]):
    """Coordinate converter for one scene of the manifest"""
    calib = float(entry["pixels_per_degree"])
    if entry.get("units", "deg") == "px":
        return lambda values: np.asarray(values, dtype=float) / calib
    return lambda values: np.asarray(values, dtype=float)


def _read_objects(
    root: Path, manifest: List[Dict[str, Any]]
) -> Dict[str, List[Tuple[ObjectTrack, bool]]]:
    """Object tracks per scene, with whether area_change was annotated"""
    path = root / OBJECTS
    if not path.exists():
        raise DatasetError("missing file", path=path)
    entries = {str(entry["scene_id"]): entry for entry in manifest}
    objects: Dict[str, List[Tuple[ObjectTrack, bool]]] = {sid: [] for sid in entries}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as e:
                raise DatasetError(
                    f"invalid JSON: {e.msg}", path=path, line=lineno
                ) from None
            scene_id = str(_require(record, "scene_id", path, lineno))
            if scene_id not in entries:
                raise ReferentialIntegrityError(
                    f"unknown scene {scene_id!r}",
                    path=path,
                    line=lineno,
                    field="scene_id",
                )
            object_id = str(_require(record, "object_id", path, lineno))
            is_target = _require(record, "is_target", path, lineno)
            if not isinstance(is_target, bool):
                raise DatasetError(
                    f"expected a boolean, got {is_target!r}",
                    path=path,
                    line=lineno,
                    field="is_target",
                )
            props = dict(_require(record, "properties", path, lineno))
            annotated = "area_change" in props
            if not annotated:
                if not entries[scene_id].get("regions"):
                    raise DatasetError(
                        "missing property and the scene has no regions to derive "
                        "it from",
                        path=path,
                        line=lineno,
                        field="area_change",
                    )
                props["area_change"] = False
            try:
                properties = ObjectProperties.from_dict(props)
            except DatasetError as e:
                raise DatasetError(
                    e.message, path=path, line=lineno, field=f"properties.{e.field}"
                ) from None
            try:
                boxes = np.array(_require(record, "boxes", path, lineno), dtype=float)
            except (TypeError, ValueError):
                boxes = np.empty(0)
            if boxes.ndim != 2 or boxes.shape[1] != 5:
                raise DatasetError(
                    "expected a list of [t, xmin, ymin, xmax, ymax]",
                    path=path,
                    line=lineno,
                    field="boxes",
                )
            boxes[:, 1:] = _to_deg(entries[scene_id])(boxes[:, 1:])
            try:
                track = ObjectTrack(object_id, is_target, boxes, properties)
            except DatasetError as e:
                e.path, e.line = path, lineno
                raise
            objects[scene_id].append((track, annotated))
    return objects


def _build_scenes(
    root: Path,
    manifest: List[Dict[str, Any]],
    objects: Dict[str, List[Tuple[ObjectTrack, bool]]],
) -> List[SceneRecord]:
    from .features import derive_area_change

    path = root / MANIFEST
    scenes = []
    for entry in manifest:
        scene_id = str(entry["scene_id"])
        convert = _to_deg(entry)
        regions = None
        if entry.get("regions"):
            regions = tuple(
                RegionPolygon(
                    str(_require(region, "region_id", path)),
                    tuple(
                        (float(x), float(y))
                        for x, y in convert(_require(region, "vertices", path))
                    ),
                )
                for region in entry["regions"]
            )
        vx, vy = convert(entry["vanishing_point"])
        try:
            scene = SceneRecord(
                scene_id=scene_id,
                pause_time=float(entry["pause_time"]),
                vanishing_point=(float(vx), float(vy)),
                pixels_per_degree=float(entry["pixels_per_degree"]),
                objects=tuple(track for track, _ in objects[scene_id]),
                window_len=float(entry.get("window_len", 10.0)),
                frame_rate=float(entry.get("frame_rate", 60.0)),
                regions=regions,
            )
        except DatasetError as e:
            e.path = e.path or path
            raise
        derived = [track for track, annotated in objects[scene_id] if not annotated]
        if derived:
            tracks = []
            for track, annotated in objects[scene_id]:
                if not annotated:
                    change = derive_area_change(track, scene)
                    track = dataclasses.replace(
                        track,
                        properties=dataclasses.replace(
                            track.properties, area_change=change
                        ),
                    )
                tracks.append(track)
            logger.debug(
                "Derived area_change for %s objects of scene %s",
                len(derived),
                scene_id,
            )
            scene = dataclasses.replace(scene, objects=tuple(tracks))
        if not scene.targets:
            logger.warning("Scene %s has no target object", scene_id)
        scenes.append(scene)
    return scenes


def read_gaze(
    path: Path, participant_id: str, scene: SceneRecord, units: str = "deg"
) -> GazeTrack:
    frame = _read_csv(path, GAZE_HEADER)
    t = _floats(frame, "t", path)
    x = _floats(frame, "x", path)
    y = _floats(frame, "y", path)
    valid = np.array(
        [_flag(v, "valid", path, i + 2) for i, v in enumerate(frame["valid"])],
        dtype=bool,
    )
    if units == "px":
        x = x / scene.pixels_per_degree
        y = y / scene.pixels_per_degree
    steps = np.diff(t)
    if np.any(steps <= 0):
        row = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise TimestampError(
            "timestamps are not strictly increasing", path=path, line=row + 2, field="t"
        )
    if len(steps):
        spacing = float(np.median(steps))
        if abs(spacing - scene.frame_period) > SPACING_JITTER * scene.frame_period:
            raise TimestampError(
                f"median sample spacing {spacing:g}s does not match the "
                f"{scene.frame_rate:g} Hz frame rate",
                path=path,
                field="t",
            )
    t_start, t_end = window_of(scene)
    if not np.any(valid & (t > t_start) & (t <= t_end)):
        raise TimestampError(
            "no valid sample inside the analysis window", path=path, field="t"
        )
    return GazeTrack(participant_id, scene.scene_id, t, x, y, valid)


def _read_labels(root: Path, scenes: Dict[str, SceneRecord]) -> List[AwarenessLabel]:
    path = root / LABELS
    frame = _read_csv(path, LABELS_HEADER)
    labels = []
    seen = set()
    for i, (participant, scene_id, object_id, aware) in enumerate(
        frame.itertuples(index=False, name=None)
    ):
        line = i + 2
        scene = scenes.get(scene_id)
        if scene is None:
            raise ReferentialIntegrityError(
                f"unknown scene {scene_id!r}", path=path, line=line, field="scene"
            )
        if not scene.has_object(object_id):
            raise ReferentialIntegrityError(
                f"unknown object {object_id!r} in scene {scene_id!r}",
                path=path,
                line=line,
                field="object",
            )
        if not scene.object(object_id).is_target:
            raise ReferentialIntegrityError(
                f"object {object_id!r} of scene {scene_id!r} is not a target",
                path=path,
                line=line,
                field="object",
            )
        label = AwarenessLabel(
            participant, scene_id, object_id, _flag(aware, "aware", path, line)
        )
        if label.key in seen:
            raise DatasetError(
                f"duplicate label for {'/'.join(label.key)}", path=path, line=line
            )
        seen.add(label.key)
        labels.append(label)
    return labels


def load_dataset(root: Union[str, Path]) -> Dataset:
    """Read and validate a dataset directory"""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError("not a dataset directory", path=root)
    manifest = _read_manifest(root)
    scenes = _build_scenes(root, manifest, _read_objects(root, manifest))
    by_id = {scene.scene_id: scene for scene in scenes}
    units = {str(entry["scene_id"]): entry.get("units", "deg") for entry in manifest}

    gaze = []
    gaze_root = root / GAZE_DIR
    if gaze_root.is_dir():
        for participant_dir in sorted(p for p in gaze_root.iterdir() if p.is_dir()):
            for csv in sorted(participant_dir.glob("*.csv")):
                scene = by_id.get(csv.stem)
                if scene is None:
                    raise ReferentialIntegrityError(
                        f"gaze track for unknown scene {csv.stem!r}", path=csv
                    )
                gaze.append(
                    read_gaze(csv, participant_dir.name, scene, units[scene.scene_id])
                )

    labels = _read_labels(root, by_id)
    tracks = {(g.participant_id, g.scene_id) for g in gaze}
    for key in sorted({(lb.participant_id, lb.scene_id) for lb in labels} - tracks):
        logger.warning(
            "No gaze track for participant %s in scene %s, using an empty track", *key
        )
    # one label per (participant, scene, target), duplicates rejected above
    labelled = {lb.key for lb in labels}
    for participant in sorted({lb.participant_id for lb in labels}):
        for scene in scenes:
            for target in scene.targets:
                key = (participant, scene.scene_id, target.object_id)
                if key not in labelled:
                    raise LabelCountError(
                        f"no label for {'/'.join(key)}", path=root / LABELS
                    )

    ds = Dataset(tuple(scenes), tuple(gaze), tuple(labels))
    logger.info(
        "Loaded %s scenes, %s gaze tracks and %s labels from %s",
        len(ds.scenes),
        len(ds.gaze),
        len(ds.labels),
        root,
    )
    return ds


def write_dataset(ds: Dataset, root: Union[str, Path]) -> None:
    """Write ``ds`` in the directory layout read by :func:`load_dataset`"""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {"scenes": []}
    for scene in ds.scenes:
        entry: Dict[str, Any] = {
            "scene_id": scene.scene_id,
            "pause_time": scene.pause_time,
            "window_len": scene.window_len,
            "frame_rate": scene.frame_rate,
            "units": "deg",
            "pixels_per_degree": scene.pixels_per_degree,
            "vanishing_point": list(scene.vanishing_point),
        }
        if scene.regions is not None:
            entry["regions"] = [
                {"region_id": r.region_id, "vertices": [list(v) for v in r.vertices]}
                for r in scene.regions
            ]
        manifest["scenes"].append(entry)
    (root / MANIFEST).write_text(json.dumps(manifest, indent=4) + "\n")

    with open(root / OBJECTS, "w") as f:
        for scene, obj in ds.iter_objects():
            record = {
                "scene_id": scene.scene_id,
                "object_id": obj.object_id,
                "is_target": obj.is_target,
                "properties": obj.properties.to_dict(),
                "boxes": obj.boxes.tolist(),
            }
            f.write(json.dumps(record) + "\n")

    for g in ds.gaze:
        path = root / GAZE_DIR / g.participant_id / f"{g.scene_id}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(
            {"t": g.t, "x": g.x, "y": g.y, "valid": g.valid.astype(int)}
        ).to_csv(path, index=False, float_format="%.17g")

    pd.DataFrame(
        [
            (lb.participant_id, lb.scene_id, lb.object_id, int(lb.aware))
            for lb in ds.labels
        ],
        columns=list(LABELS_HEADER),
    ).to_csv(root / LABELS, index=False)
    logger.info("Wrote %s scenes to %s", len(ds.scenes), root)
