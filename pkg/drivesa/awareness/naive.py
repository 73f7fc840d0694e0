# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Pure-Python reference implementations, used as test oracles.

None of this is meant to be efficient; only to be simple enough to be
obviously right, and to provide the same behavior as the vectorized code.
"""

import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .scene import Dataset, GazeTrack, ObjectTrack, SceneRecord


def longest_run(flags: Sequence[bool]) -> int:
    """Length of the longest run of true values

    >>> longest_run([True, True, False, True, True, True, False])
    3
    """
    best = current = 0
    for flag in flags:
        current = current + 1 if flag else 0
        best = max(best, current)
    return best


def pair_auc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Share of (positive, negative) pairs ordered correctly, ties count half

    >>> pair_auc([0.9, 0.8, 0.3], [True, False, True])
    0.5
    """
    positives = [s for s, label in zip(scores, labels) if label]
    negatives = [s for s, label in zip(scores, labels) if not label]
    total = 0.0
    for p in positives:
        for n in negatives:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(positives) * len(negatives))


def jacobi_eigenvalues(
    matrix: Sequence[Sequence[float]], tol: float = 1e-14, max_sweeps: int = 100
) -> List[float]:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, in
    descending order

    >>> [round(v, 12) for v in jacobi_eigenvalues([[2.0, 1.0], [1.0, 2.0]])]
    [3.0, 1.0]
    """
    a = [list(map(float, row)) for row in matrix]
    n = len(a)
    for _ in range(max_sweeps):
        off = sum(a[i][j] ** 2 for i in range(n) for j in range(n) if i != j)
        scale = sum(a[i][i] ** 2 for i in range(n)) or 1.0
        if off <= tol * tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p][q] == 0.0:
                    continue
                theta = (a[q][q] - a[p][p]) / (2 * a[p][q])
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1)
                )
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
    return sorted((a[i][i] for i in range(n)), reverse=True)


def point_in_polygon(
    x: float, y: float, vertices: Sequence[Tuple[float, float]]
) -> bool:
    """Even-odd ray casting towards +x

    >>> point_in_polygon(0.5, 0.5, [(0, 0), (1, 0), (1, 1), (0, 1)])
    True
    """
    inside = False
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if y1 == y2:
            continue
        if (y1 > y) != (y2 > y):
            if x < x1 + (y - y1) * (x2 - x1) / (y2 - y1):
                inside = not inside
    return inside


def _distance(gx, gy, box) -> float:
    xmin, ymin, xmax, ymax = box
    dx = max(xmin - gx, 0.0, gx - xmax)
    dy = max(ymin - gy, 0.0, gy - ymax)
    return math.hypot(dx, dy)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


class NaiveExtractor:
    """Frame-by-frame recomputation of the features of a dataset.

    >>> from drivesa.awareness.scene import ObjectProperties
    >>> props = ObjectProperties.from_dict({
    ...     "kind": "vehicle", "relevance": False, "light_green": False,
    ...     "contrast": "low", "movement": "static", "area_change": False,
    ... })
    >>> obj = ObjectTrack("car", True, [[9.95, 0, 0, 2, 2], [10.0, 0, 0, 2, 2]], props)
    >>> scene = SceneRecord("s", 10.0, (0.0, 0.0), 30.0, (obj,), frame_rate=20.0)
    >>> gaze = GazeTrack("p", "s", [9.95, 10.0], [5.0, 1.0], [1.0, 1.0], [True, True])
    >>> f = NaiveExtractor(Dataset((scene,), (gaze,), ())).features("p", "s", "car")
    >>> f["G_pause"], f["G_min"], f["G_average"]
    (0.0, 0.0, 1.5)
    """

    def __init__(
        self,
        ds: Dataset,
        radii: Sequence[float] = (2.5, 4.1, 9.1, 15.0),
        max_distance_deg: float = 60.0,
        reference_heights: Optional[Mapping[str, float]] = None,
    ):
        self.ds = ds
        self.radii = list(radii)
        self.max_distance_deg = max_distance_deg
        self.reference_heights = reference_heights

    def frames(self, scene: SceneRecord) -> List[float]:
        n = int(round(scene.window_len * scene.frame_rate))
        return [scene.pause_time - k / scene.frame_rate for k in reversed(range(n))]

    def _nearest(
        self, times: Sequence[float], t: float, period: float
    ) -> Optional[int]:
        best = None
        for i, s in enumerate(times):
            if best is None or abs(s - t) < abs(times[best] - t):
                best = i
        if best is None or not abs(times[best] - t) < period / 2:
            return None
        return best

    def _gaze(self, participant: str, scene: SceneRecord) -> GazeTrack:
        for g in self.ds.gaze:
            if g.participant_id == participant and g.scene_id == scene.scene_id:
                return g
        return GazeTrack.empty(participant, scene.scene_id)

    def boxes(self, obj: ObjectTrack, scene: SceneRecord) -> List[Optional[Tuple]]:
        times = [float(b[0]) for b in obj.boxes]
        result: List[Optional[Tuple]] = []
        for t in self.frames(scene):
            i = self._nearest(times, t, 1 / scene.frame_rate)
            if i is None:
                result.append(None)
            else:
                result.append(tuple(float(v) for v in obj.boxes[i][1:]))
        return result

    def distances(
        self, participant: str, scene: SceneRecord, obj: ObjectTrack
    ) -> List[Tuple[float, Optional[float]]]:
        """(frame time, distance or None when not co-visible) per frame"""
        gaze = self._gaze(participant, scene)
        times = [float(t) for t in gaze.t]
        result = []
        for t, box in zip(self.frames(scene), self.boxes(obj, scene)):
            i = self._nearest(times, t, 1 / scene.frame_rate)
            if box is None or i is None or not gaze.valid[i]:
                result.append((t, None))
            else:
                result.append((t, _distance(float(gaze.x[i]), float(gaze.y[i]), box)))
        return result

    def baseline1(
        self,
        participant: str,
        scene_id: str,
        object_id: str,
        radius: float = 2.5,
        duration_ms: float = 120.0,
    ) -> bool:
        scene = self.ds.scene(scene_id)
        per_frame = self.distances(participant, scene, scene.object(object_id))
        run = longest_run([d is not None and d < radius for _, d in per_frame])
        return run / scene.frame_rate > duration_ms / 1000.0

    def _reference_heights(self) -> Dict[str, float]:
        if self.reference_heights is not None:
            return dict(self.reference_heights)
        heights: Dict[str, List[float]] = {}
        for scene in self.ds.scenes:
            for obj in scene.objects:
                visible = [b for b in self.boxes(obj, scene) if b is not None]
                box = visible[-1]
                heights.setdefault(obj.kind.value, []).append(box[3] - box[1])
        result = {}
        for kind, values in heights.items():
            values = sorted(values)
            mid = len(values) // 2
            result[kind] = (
                values[mid] if len(values) % 2 else (values[mid - 1] + values[mid]) / 2
            )
        self.reference_heights = result
        return result

    def features(
        self, participant: str, scene_id: str, object_id: str
    ) -> Dict[str, float]:
        scene = self.ds.scene(scene_id)
        obj = scene.object(object_id)
        period = 1 / scene.frame_rate
        per_frame = self.distances(participant, scene, obj)
        covisible = [(t, d) for t, d in per_frame if d is not None]
        f: Dict[str, float] = {}

        if covisible:
            f["G_pause"] = covisible[-1][1]
            f["G_min"] = min(d for _, d in covisible)
            f["G_average"] = _mean([d for _, d in covisible])
        else:
            f["G_pause"] = f["G_min"] = f["G_average"] = self.max_distance_deg

        for r in self.radii:
            label = f"{r:g}"
            within = [(t, d) for t, d in covisible if d < r]
            if not covisible:
                elapse, dwell, average = scene.window_len, 0.0, self.max_distance_deg
            elif within:
                elapse = scene.pause_time - within[-1][0]
                dwell = len(within) * period
                average = _mean([d for _, d in within])
            else:
                elapse = scene.window_len
                dwell = 0.0
                average = _mean([d for _, d in covisible])
            f[f"HV_elapse_{label}"] = elapse
            f[f"HV_dwell_{label}"] = dwell
            f[f"HV_average_{label}"] = average

        boxes = self.boxes(obj, scene)
        visible = [b for b in boxes if b is not None]
        box = visible[-1]
        cx, cy = (box[0] + box[2]) / 2, (box[1] + box[3]) / 2
        vx, vy = scene.vanishing_point
        f["OS_proximity"] = math.hypot(cx - vx, cy - vy)
        f["OS_duration"] = min(len(visible) * period, scene.window_len)
        f["OS_size"] = (box[3] - box[1]) / self._reference_heights()[obj.kind.value]
        f["OS_density"] = float(
            sum(1 for o in scene.objects if self.boxes(o, scene)[-1] is not None)
        )

        p = obj.properties
        f["OP_type"] = 1.0 if p.kind.value == "pedestrian" else 0.0
        f["OP_relevance"] = 1.0 if p.relevance else 0.0
        f["OP_light"] = 1.0 if p.light_green else 0.0
        f["OP_change"] = 1.0 if p.area_change else 0.0
        for name, value in (("low", "low"), ("med", "medium"), ("high", "high")):
            f[f"OP_contrast_{name}"] = 1.0 if p.contrast.value == value else 0.0
        for name, value in (
            ("static", "static"),
            ("slow", "slow"),
            ("med", "medium"),
            ("high", "high"),
        ):
            f[f"OP_movement_{name}"] = 1.0 if p.movement.value == value else 0.0
        return f

    def area_change(self, scene_id: str, object_id: str, horizon: float = 1.0) -> bool:
        scene = self.ds.scene(scene_id)
        obj = scene.object(object_id)
        regions = list(scene.regions or ())
        labels = []
        for t, box in zip(self.frames(scene), self.boxes(obj, scene)):
            if box is None or t < scene.pause_time - horizon - 0.5 / scene.frame_rate:
                continue
            cx, cy = (box[0] + box[2]) / 2, (box[1] + box[3]) / 2
            label = -1
            for i, region in enumerate(regions):
                if point_in_polygon(cx, cy, region.vertices):
                    label = i
                    break
            labels.append(label)
        return len(set(labels)) > 1
