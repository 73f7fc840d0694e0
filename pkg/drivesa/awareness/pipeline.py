# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Situation-awareness predictors.

Baseline 1 is a fixation rule. All other presets are a stage-1 pipeline
(min-max scaling, PCA, class-weighted linear SVM, sigmoid calibration) on a
subset of the feature families; memory presets add a stage-2 logistic
regression re-ranking the stage-1 probabilities of all the objects of a scene.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import numeric
from .config import MEMORY_SHAPES, check_config
from .features import (
    BoxFrames,
    FeatureTable,
    GazeFrames,
    SensoryRadii,
    box_distances,
    family_columns,
)
from .scene import Dataset, GazeTrack, ObjectTrack, SceneRecord

logger = logging.getLogger(__name__)

BASELINE1 = "baseline1"

# finite stand-ins for the open thresholds, probabilities lie in (0, 1)
ACCEPT_ALL = -1.0
REJECT_ALL = 2.0

LabelIndex = Mapping[Tuple[str, str, str], bool]


class PipelineError(ValueError):
    """Invalid method, or inputs a trained pipeline cannot score"""


@dataclass(frozen=True)
class MemorySpec:
    capacity: int = 7
    shape: str = "tanh"

    def __post_init__(self):
        if isinstance(self.capacity, bool) or int(self.capacity) != self.capacity:
            raise PipelineError(
                f"memory capacity must be an integer: {self.capacity!r}"
            )
        if self.capacity < 1:
            raise PipelineError(f"memory capacity must be >= 1: {self.capacity!r}")
        if self.shape not in MEMORY_SHAPES:
            raise PipelineError(f"unknown memory shape {self.shape!r}")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    families: Tuple[str, ...]
    pca_k: Any = 11
    memory: Optional[MemorySpec] = None

    def __post_init__(self):
        if not self.families:
            raise PipelineError(f"method {self.name!r} has no feature family")
        if self.pca_k != "auto" and (
            isinstance(self.pca_k, bool) or not isinstance(self.pca_k, int)
        ):
            raise PipelineError(f"pca_k must be an integer or 'auto': {self.pca_k!r}")
        if self.pca_k != "auto" and self.pca_k < 1:
            raise PipelineError(f"pca_k must be positive: {self.pca_k!r}")

    def columns(self, radii: SensoryRadii) -> List[str]:
        return [c for family in self.families for c in family_columns(family, radii)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "families": list(self.families),
            "pca_k": self.pca_k,
            "memory": (
                None
                if self.memory is None
                else {"capacity": self.memory.capacity, "shape": self.memory.shape}
            ),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MethodSpec":
        memory = d.get("memory")
        return cls(
            name=d["name"],
            families=tuple(d["families"]),
            pca_k=d["pca_k"],
            memory=None if memory is None else MemorySpec(**memory),
        )


_BASE3 = ("gaze_point", "object_spatial")
_ALL = ("gaze_point", "object_spatial", "object_property", "sensory")

PRESETS: Dict[str, MethodSpec] = {
    "baseline3": MethodSpec("baseline3", _BASE3, pca_k=5),
    "method1": MethodSpec("method1", _BASE3 + ("object_property",), pca_k=11),
    "method2": MethodSpec("method2", _BASE3 + ("sensory",), pca_k=11),
    "method12": MethodSpec("method12", _ALL, pca_k=11),
    "method123": MethodSpec("method123", _ALL, pca_k=11, memory=MemorySpec()),
    "method3": MethodSpec("method3", _BASE3, pca_k=11, memory=MemorySpec()),
}

METHOD_NAMES = (BASELINE1, *PRESETS)


def method_spec(name: str, conf: Optional[Mapping[str, Any]] = None) -> MethodSpec:
    """Preset ``name`` with the configured PCA and memory overrides"""
    try:
        spec = PRESETS[name]
    except KeyError:
        raise PipelineError(
            f"unknown method {name!r}, expected one of {', '.join(METHOD_NAMES)}"
        ) from None
    conf = check_config(conf)
    pca_k = conf["pca_k"] if conf["pca_k"] is not None else spec.pca_k
    memory = spec.memory
    if memory is not None:
        memory = MemorySpec(conf["memory_capacity"], conf["memory_shape"])
    return MethodSpec(spec.name, spec.families, pca_k, memory)


def memory_rank(object_ids: Sequence[str], scores: Sequence[float]) -> np.ndarray:
    """Rank of each object within its scene, 1 for the highest score, ties
    broken by ascending object id

    >>> memory_rank(["a", "b", "c"], [0.9, 0.4, 0.7]).tolist()
    [1, 3, 2]
    >>> memory_rank(["b", "a"], [0.5, 0.5]).tolist()
    [2, 1]
    """
    if len(object_ids) == 0:
        raise PipelineError("cannot rank an empty scene")
    if len(object_ids) != len(scores):
        raise PipelineError("object ids and scores have different lengths")
    _, id_order = np.unique(np.asarray(object_ids, dtype=str), return_inverse=True)
    order = np.lexsort((id_order, -np.asarray(scores, dtype=float)))
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(1, len(order) + 1)
    return ranks


def memory_feature(rank, spec: MemorySpec):
    """Memory score of a scene rank (scalar or array)"""
    r = np.asarray(rank, dtype=float)
    if np.any(r < 1):
        raise PipelineError("ranks start at 1")
    if spec.shape == "tanh":
        m = np.tanh(r - spec.capacity)
    elif spec.shape == "step":
        m = (r > spec.capacity).astype(float)
    else:
        m = r.copy()
    return m if m.ndim else float(m)


@dataclass(frozen=True, eq=False)
class MemoryScore:
    """Scene rank of every row and its memory feature"""

    rank: np.ndarray
    value: np.ndarray


def memory_scores(
    frame: pd.DataFrame, scores: np.ndarray, spec: MemorySpec
) -> MemoryScore:
    rank = scene_ranks(frame, scores)
    return MemoryScore(rank, np.atleast_1d(memory_feature(rank, spec)))


def scene_ranks(frame: pd.DataFrame, scores: np.ndarray) -> np.ndarray:
    """:func:`memory_rank` within every (participant, scene) of ``frame``,
    returned in the row order of ``frame``"""
    work = pd.DataFrame(
        {
            "participant": frame["participant"].to_numpy(),
            "scene": frame["scene"].to_numpy(),
            "object": frame["object"].to_numpy(),
            "score": np.asarray(scores, dtype=float),
            "row": np.arange(len(frame)),
        }
    )
    work = work.sort_values(
        ["participant", "scene", "score", "object"],
        ascending=[True, True, False, True],
        kind="mergesort",
    )
    ranks = np.empty(len(frame), dtype=np.int64)
    ranks[work["row"].to_numpy()] = (
        work.groupby(["participant", "scene"], sort=False).cumcount().to_numpy() + 1
    )
    return ranks


def select_threshold(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Smallest threshold maximizing training accuracy of ``score > tau``.

    Candidates are -inf, the midpoints between adjacent distinct scores, and
    +inf.

    >>> select_threshold([0.2, 0.8], [False, True])
    0.5
    >>> select_threshold([0.2, 0.8], [True, True])
    -inf
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if len(scores) == 0:
        raise PipelineError("cannot select a threshold without scores")
    distinct = np.unique(scores)
    candidates = np.concatenate(
        [[-np.inf], (distinct[:-1] + distinct[1:]) / 2, [np.inf]]
    )
    pos = np.sort(scores[labels])
    neg = np.sort(scores[~labels])
    # positives above tau plus negatives at or below tau
    correct = (len(pos) - np.searchsorted(pos, candidates, side="right")) + (
        np.searchsorted(neg, candidates, side="right")
    )
    return float(candidates[int(np.argmax(correct))])


def finite_threshold(tau: float) -> float:
    if tau == -np.inf:
        return ACCEPT_ALL
    if tau == np.inf:
        return REJECT_ALL
    return tau


# Baseline 1


def longest_runs(mask: np.ndarray) -> np.ndarray:
    """Length of the longest run of True in each row of a boolean matrix

    >>> longest_runs(np.array([[True, True, False, True], [False] * 4])).tolist()
    [2, 0]
    """
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    rows, cols = mask.shape
    padded = np.zeros((rows, cols + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    edges = np.diff(padded, axis=1)
    starts = np.argwhere(edges == 1)
    ends = np.argwhere(edges == -1)
    result = np.zeros(rows, dtype=np.int64)
    np.maximum.at(result, starts[:, 0], ends[:, 1] - starts[:, 1])
    return result


def frame_distances(
    gaze: GazeTrack, obj: ObjectTrack, scene: SceneRecord
) -> np.ndarray:
    """Gaze-to-box distance per frame of the window, NaN where the frame is not
    co-visible"""
    return _frame_distances(GazeFrames.build(gaze, scene), BoxFrames.build(obj, scene))


def _frame_distances(gaze_frames: GazeFrames, box_frames: BoxFrames) -> np.ndarray:
    covisible = gaze_frames.ok & box_frames.ok
    result = np.full(len(covisible), np.nan)
    result[covisible] = box_distances(
        gaze_frames.x[covisible], gaze_frames.y[covisible], box_frames.boxes[covisible]
    )
    return result


def fixation_time(distances: np.ndarray, radius: float, period: float) -> np.ndarray:
    """Duration of the longest run of co-visible frames within ``radius``"""
    with np.errstate(invalid="ignore"):
        hits = np.atleast_2d(distances) < radius
    return longest_runs(hits) * period


def baseline1_predict(
    gaze: GazeTrack,
    obj: ObjectTrack,
    scene: SceneRecord,
    radius: float = 2.5,
    duration_ms: float = 120.0,
) -> bool:
    """Aware iff the gaze stays within ``radius`` degrees of the box for more
    than ``duration_ms`` consecutive milliseconds"""
    run = fixation_time(frame_distances(gaze, obj, scene), radius, scene.frame_period)
    return bool(run[0] > duration_ms / 1000.0)


@dataclass(frozen=True, eq=False)
class LabelledDistances:
    """Per-frame distances of the labelled rows, one matrix per scene"""

    keys: List[Tuple[str, str, str]]
    labels: np.ndarray
    matrices: List[np.ndarray]
    periods: List[float]

    @classmethod
    def build(cls, ds: Dataset, labels: Optional[LabelIndex] = None):
        if labels is None:
            labels = ds.label_index()
        gaze_index = ds.gaze_index()
        keys, values, matrices, periods = [], [], [], []
        for scene in ds.scenes:
            scene_keys = sorted(k for k in labels if k[1] == scene.scene_id)
            if not scene_keys:
                continue
            gaze_frames: Dict[str, GazeFrames] = {}
            box_frames: Dict[str, BoxFrames] = {}
            rows = []
            for participant, _, object_id in scene_keys:
                if participant not in gaze_frames:
                    gaze = gaze_index.get((participant, scene.scene_id))
                    if gaze is None:
                        gaze = GazeTrack.empty(participant, scene.scene_id)
                    gaze_frames[participant] = GazeFrames.build(gaze, scene)
                if object_id not in box_frames:
                    box_frames[object_id] = BoxFrames.build(
                        scene.object(object_id), scene
                    )
                rows.append(
                    _frame_distances(gaze_frames[participant], box_frames[object_id])
                )
            keys.extend(scene_keys)
            values.extend(labels[k] for k in scene_keys)
            matrices.append(np.vstack(rows))
            periods.append(scene.frame_period)
        return cls(keys, np.array(values, dtype=bool), matrices, periods)

    def fixation_times(self, radius: float) -> np.ndarray:
        if not self.matrices:
            return np.zeros(0)
        return np.concatenate(
            [
                fixation_time(matrix, radius, period)
                for matrix, period in zip(self.matrices, self.periods)
            ]
        )


def sweep_grid(low: float, high: float, points: int, default: float) -> np.ndarray:
    """Geometric grid whose point nearest to ``default`` is snapped onto it"""
    grid = np.geomspace(low, high, points)
    grid[np.argmin(np.abs(np.log(grid) - math.log(default)))] = default
    return grid


SWEEP_RANGES = {"radius": (0.1, 30.0), "duration": (10.0, 3000.0)}


@dataclass(frozen=True, eq=False)
class Baseline1Sweep:
    parameter: str
    values: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    accuracy: np.ndarray
    auc: float

    def to_frame(self) -> pd.DataFrame:
        unit = "deg" if self.parameter == "radius" else "ms"
        return pd.DataFrame(
            {
                f"{self.parameter}_{unit}": self.values,
                "fpr": self.fpr,
                "tpr": self.tpr,
                "accuracy": self.accuracy,
            }
        )

    def roc_points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sweep points sorted by (FPR, TPR) and closed by (0, 0) and (1, 1)"""
        return _closed_curve(self.fpr, self.tpr)


def _closed_curve(fpr: np.ndarray, tpr: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((tpr, fpr))
    xs = np.concatenate([[0.0], fpr[order], [1.0]])
    ys = np.concatenate([[0.0], tpr[order], [1.0]])
    return xs, ys


def baseline1_roc(
    ds: Dataset,
    mode: str,
    points: int = 200,
    radius: float = 2.5,
    duration_ms: float = 120.0,
    labels: Optional[LabelIndex] = None,
    distances: Optional[LabelledDistances] = None,
) -> Baseline1Sweep:
    """Sweep ``radius`` (0.1-30 deg) or ``duration`` (10-3000 ms) on a geometric
    grid, holding the other parameter"""
    if mode not in SWEEP_RANGES:
        raise PipelineError(f"unknown sweep {mode!r}, expected radius or duration")
    if distances is None:
        distances = LabelledDistances.build(ds, labels)
    y = distances.labels
    if len(y) == 0:
        raise PipelineError("no labelled rows to sweep")
    low, high = SWEEP_RANGES[mode]
    grid = sweep_grid(low, high, points, radius if mode == "radius" else duration_ms)
    if mode == "radius":
        predictions = np.vstack(
            [distances.fixation_times(r) > duration_ms / 1000.0 for r in grid]
        )
    else:
        times = distances.fixation_times(radius)
        predictions = times[None, :] > grid[:, None] / 1000.0
    n_pos = max(int(y.sum()), 1)
    n_neg = max(int((~y).sum()), 1)
    tpr = (predictions & y).sum(axis=1) / n_pos
    fpr = (predictions & ~y).sum(axis=1) / n_neg
    accuracy = (predictions == y).mean(axis=1)
    sweep = Baseline1Sweep(
        mode, grid, fpr, tpr, accuracy, numeric.trapezoid_auc(*_closed_curve(fpr, tpr))
    )
    logger.info("Baseline 1 %s sweep: AUC %.4f over %s rows", mode, sweep.auc, len(y))
    return sweep


# Stage 1 and stage 2


@dataclass(frozen=True, eq=False)
class Stage1:
    columns: Tuple[str, ...]
    scaler: numeric.MinMaxScaler
    pca: numeric.PcaBasis
    svm: numeric.LinearSvm

    def project(self, X: np.ndarray) -> np.ndarray:
        return numeric.project(self.pca, numeric.apply_minmax(self.scaler, X))

    def margins(self, X: np.ndarray) -> np.ndarray:
        return numeric.decision(self.svm, self.project(X))

    def scores(self, X: np.ndarray) -> np.ndarray:
        return numeric.sigmoid_score(self.margins(X))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "columns": list(self.columns),
            "scaler": self.scaler.to_dict(),
            "pca": self.pca.to_dict(),
            "svm": self.svm.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Stage1":
        return cls(
            tuple(d["columns"]),
            numeric.MinMaxScaler.from_dict(d["scaler"]),
            numeric.PcaBasis.from_dict(d["pca"]),
            numeric.LinearSvm.from_dict(d["svm"]),
        )


def _fit_stage1(
    X: np.ndarray,
    y: np.ndarray,
    columns: Sequence[str],
    k: int,
    c: float,
    conf: Mapping[str, Any],
    seed: Optional[int],
) -> Stage1:
    scaler = numeric.fit_minmax(X)
    scaled = numeric.apply_minmax(scaler, X)
    pca = numeric.fit_pca(scaled, k)
    svm = numeric.train_svm(
        numeric.project(pca, scaled),
        np.where(y, 1, -1),
        c=c,
        seed=seed,
        max_iter=conf["svm_max_iter"],
        tol=conf["svm_tol"],
    )
    return Stage1(tuple(columns), scaler, pca, svm)


def grouped_splits(groups: Sequence[str], n_folds: int) -> List[np.ndarray]:
    """Test masks of ``n_folds`` folds assigning whole groups round-robin in
    sorted group order"""
    groups = np.asarray(groups)
    unique = sorted(set(groups.tolist()))
    if len(unique) < 2:
        raise PipelineError("inner cross-validation needs at least 2 scenes")
    n_folds = min(n_folds, len(unique))
    fold_of = {g: i % n_folds for i, g in enumerate(unique)}
    assignment = np.array([fold_of[g] for g in groups.tolist()])
    return [assignment == i for i in range(n_folds)]


def _inner_accuracy(X, y, groups, columns, k, c, conf, seed) -> float:
    correct = total = 0
    for test in grouped_splits(groups, conf["inner_folds"]):
        train = ~test
        try:
            stage1 = _fit_stage1(X[train], y[train], columns, k, c, conf, seed)
        except numeric.SingleClassError:
            continue
        tau = select_threshold(stage1.scores(X[train]), y[train])
        correct += int(np.sum((stage1.scores(X[test]) > tau) == y[test]))
        total += int(test.sum())
    return correct / total if total else 0.0


def train_stage1(
    rows: FeatureTable,
    labels: np.ndarray,
    spec: MethodSpec,
    conf: Optional[Mapping[str, Any]] = None,
    seed: Optional[int] = None,
) -> Tuple[Stage1, Dict[str, Any]]:
    """Fit scaling, PCA and the SVM on labelled target rows.

    Returns the stage and the selection record (chosen k and C, inner-CV
    accuracies when they were searched).
    """
    conf = check_config(conf)
    columns = spec.columns(rows.radii)
    X = rows.matrix(columns)
    y = np.asarray(labels, dtype=bool)
    groups = rows.frame["scene"].to_numpy()
    c = conf["svm_c"]
    selection: Dict[str, Any] = {}

    if spec.pca_k == "auto":
        scores = {
            k: _inner_accuracy(X, y, groups, columns, k, c, conf, seed)
            for k in range(1, len(columns) + 1)
        }
        k = max(scores, key=lambda key: (scores[key], -key))
        selection["pca_k_accuracy"] = {str(key): v for key, v in scores.items()}
        logger.info("Selected %s PCA components by inner cross-validation", k)
    else:
        k = min(spec.pca_k, len(columns))
    selection["pca_k"] = k

    if conf["svm_c_grid"]:
        scores = {
            grid_c: _inner_accuracy(X, y, groups, columns, k, grid_c, conf, seed)
            for grid_c in conf["svm_c_grid"]
        }
        c = max(scores, key=lambda key: (scores[key], -key))
        selection["svm_c_accuracy"] = {repr(key): v for key, v in scores.items()}
        logger.info("Selected C=%s by inner cross-validation", c)
    selection["svm_c"] = c

    return _fit_stage1(X, y, columns, k, c, conf, seed), selection


@dataclass(frozen=True, eq=False)
class Stage2:
    memory: MemorySpec
    model: numeric.LogisticModel
    append_projection: bool = False

    def inputs(
        self, stage1: Stage1, frame: pd.DataFrame, X: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Stage-2 inputs of every row and their stage-1 probabilities"""
        return _stage2_inputs(stage1, frame, X, self.memory, self.append_projection)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "memory": {"capacity": self.memory.capacity, "shape": self.memory.shape},
            "model": self.model.to_dict(),
            "append_projection": self.append_projection,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Stage2":
        return cls(
            MemorySpec(**d["memory"]),
            numeric.LogisticModel.from_dict(d["model"]),
            bool(d["append_projection"]),
        )


def _stage2_inputs(stage1, frame, X, memory, append_projection):
    p = stage1.scores(X)
    memory_score = memory_scores(frame, p, memory)
    inputs = np.column_stack([p, memory_score.value])
    if append_projection:
        inputs = np.hstack([inputs, stage1.project(X)])
    return inputs, p


def train_stage2(
    rows: FeatureTable,
    labels: LabelIndex,
    stage1: Stage1,
    memory: MemorySpec,
    conf: Optional[Mapping[str, Any]] = None,
    seed: Optional[int] = None,
) -> Stage2:
    """Train the memory re-ranking stage.

    ``rows`` holds every object of the training scenes, targets or not, so
    that ranks are computed over complete scenes; only labelled target rows
    enter the logistic regression.
    """
    conf = check_config(conf)
    frame = rows.frame
    X = rows.matrix(stage1.columns)
    inputs, _ = _stage2_inputs(
        stage1, frame, X, memory, conf["stage2_append_projection"]
    )
    keys = rows.keys()
    labelled = np.array([key in labels for key in keys], dtype=bool)
    y = np.array([labels[key] for key in keys if key in labels], dtype=float)
    model = numeric.train_logistic(
        inputs[labelled],
        y,
        seed=seed,
        l2=conf["logistic_l2"],
        max_iter=conf["logistic_max_iter"],
        tol=conf["logistic_tol"],
    )
    return Stage2(memory, model, conf["stage2_append_projection"])


@dataclass(frozen=True, eq=False)
class TrainedPipeline:
    method: MethodSpec
    radii: SensoryRadii
    max_distance_deg: float
    reference_heights: Dict[str, float]
    stage1: Stage1
    threshold: float
    stage2: Optional[Stage2] = None
    seed: Optional[int] = None
    selection: Dict[str, Any] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method.to_dict(),
            "radii": list(self.radii.theta),
            "max_distance_deg": self.max_distance_deg,
            "reference_heights": dict(self.reference_heights),
            "stage1": self.stage1.to_dict(),
            "threshold": self.threshold,
            "stage2": None if self.stage2 is None else self.stage2.to_dict(),
            "seed": self.seed,
            "selection": self.selection,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TrainedPipeline":
        try:
            return cls(
                method=MethodSpec.from_dict(d["method"]),
                radii=SensoryRadii(tuple(d["radii"])),
                max_distance_deg=float(d["max_distance_deg"]),
                reference_heights={
                    k: float(v) for k, v in d["reference_heights"].items()
                },
                stage1=Stage1.from_dict(d["stage1"]),
                threshold=float(d["threshold"]),
                stage2=None if d["stage2"] is None else Stage2.from_dict(d["stage2"]),
                seed=d.get("seed"),
                selection=dict(d.get("selection", {})),
                config=dict(d.get("config", {})),
            )
        except (KeyError, TypeError) as e:
            raise PipelineError(f"invalid model artifact: {e}") from None


def _labelled_targets(
    table: FeatureTable, labels: LabelIndex
) -> Tuple[FeatureTable, np.ndarray]:
    targets = table.targets()
    keys = targets.keys()
    keep = np.array([key in labels for key in keys], dtype=bool)
    if not keep.all():
        logger.debug("%s target rows have no label", int((~keep).sum()))
    targets = FeatureTable(targets.frame[keep].copy(), table.radii)
    return targets, np.array([labels[key] for key in targets.keys()], dtype=bool)


def _accuracy(scores: np.ndarray, labels: np.ndarray) -> Tuple[float, float]:
    tau = select_threshold(scores, labels)
    return tau, float(np.mean((scores > tau) == labels))


def train_pipeline(
    table: FeatureTable,
    labels: LabelIndex,
    spec: MethodSpec,
    conf: Optional[Mapping[str, Any]] = None,
    seed: Optional[int] = None,
) -> TrainedPipeline:
    """Train a preset on every row of ``table``.

    ``table`` holds the training scenes only, all of their objects; ``labels``
    the awareness of their targets. Reference heights default to the per-kind
    medians of the training scenes.
    """
    conf = check_config(conf)
    ref = conf["reference_heights"] or table.reference_heights()
    table = table.with_reference_heights(ref)
    targets, y = _labelled_targets(table, labels)
    if len(targets) == 0:
        raise PipelineError("no labelled target rows to train on")
    stage1, selection = train_stage1(targets, y, spec, conf, seed)

    stage2 = None
    if spec.memory is None:
        train_scores = stage1.scores(targets.matrix(stage1.columns))
    else:
        if conf["memory_sweep"]:
            sweep = {}
            for capacity in conf["memory_sweep"]:
                candidate = MemorySpec(capacity, spec.memory.shape)
                model = train_stage2(table, labels, stage1, candidate, conf, seed)
                scores = _stage2_target_scores(model, stage1, table, targets)
                sweep[str(capacity)] = _accuracy(scores, y)[1]
            selection["memory_sweep_accuracy"] = sweep
        stage2 = train_stage2(table, labels, stage1, spec.memory, conf, seed)
        train_scores = _stage2_target_scores(stage2, stage1, table, targets)

    tau, accuracy = _accuracy(train_scores, y)
    selection["train_accuracy"] = accuracy
    logger.info(
        "Trained %s on %s target rows, training accuracy %.3f",
        spec.name,
        len(targets),
        accuracy,
    )
    echo = {k: v for k, v in conf.items() if k != "threads"}
    return TrainedPipeline(
        method=spec,
        radii=table.radii,
        max_distance_deg=conf["max_distance_deg"],
        reference_heights=dict(ref),
        stage1=stage1,
        threshold=finite_threshold(tau),
        stage2=stage2,
        seed=seed,
        selection=selection,
        config=echo,
    )


def _stage2_target_scores(
    stage2: Stage2, stage1: Stage1, table: FeatureTable, targets: FeatureTable
) -> np.ndarray:
    inputs, _ = stage2.inputs(stage1, table.frame, table.matrix(stage1.columns))
    by_key = dict(zip(table.keys(), stage2.model.predict_proba(inputs)))
    return np.array([by_key[key] for key in targets.keys()])


def predict(pipeline: TrainedPipeline, table: FeatureTable) -> pd.DataFrame:
    """Score every row of ``table``.

    Memory methods rank objects within each (participant, scene) of
    ``table``, which must therefore hold complete scenes. Returns the keys,
    the score and ``aware = score > threshold``.
    """
    table = table.with_reference_heights(pipeline.reference_heights)
    X = table.matrix(pipeline.stage1.columns)
    if pipeline.stage2 is None:
        scores = pipeline.stage1.scores(X)
    else:
        inputs, _ = pipeline.stage2.inputs(pipeline.stage1, table.frame, X)
        scores = pipeline.stage2.model.predict_proba(inputs)
    result = table.frame[["participant", "scene", "object", "is_target"]].copy()
    result["score"] = np.atleast_1d(scores)
    result["aware"] = result["score"] > pipeline.threshold
    return result.reset_index(drop=True)


def iter_methods(names: Iterable[str]) -> List[str]:
    """Expand ``all`` into the registered method names"""
    result: List[str] = []
    for name in names:
        if name == "all":
            expanded = [m for m in METHOD_NAMES if m != "method3"]
        else:
            expanded = [name]
        for m in expanded:
            if m not in METHOD_NAMES:
                raise PipelineError(
                    f"unknown method {m!r}, expected one of {', '.join(METHOD_NAMES)}"
                )
            if m not in result:
                result.append(m)
    return result
