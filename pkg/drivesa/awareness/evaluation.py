# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Pause-out cross-validation, ROC/AUC and reporting"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
import logging
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import numeric
from .config import check_config
from .features import FeatureTable, SensoryRadii, extract_all
from .pipeline import (
    BASELINE1,
    LabelledDistances,
    PipelineError,
    baseline1_roc,
    method_spec,
    predict,
    train_pipeline,
)
from .scene import Dataset

logger = logging.getLogger(__name__)

# loadings above this magnitude are highlighted in PCA reports
LOADING_HIGHLIGHT = 0.2

# largest tolerated gap between the trapezoid and the rank AUC
AUC_AGREEMENT = 1e-9

# row order and labels of the comparison table
TABLE_ROWS = (
    ("baseline1", "Baseline 1"),
    ("baseline2", "Baseline 2"),
    ("baseline3", "Baseline 3"),
    ("method1", "Method 1"),
    ("method2", "Method 2"),
    ("method12", "Methods 1+2"),
    ("method123", "Methods 1+2+3"),
    ("method3", "Method 3"),
)
EXTERNAL_METHODS = {"baseline2": "external, not reproduced"}


class EvaluationError(ValueError):
    """Inputs an evaluation metric or report is undefined for"""


@dataclass(frozen=True)
class Fold:
    test: str
    train: Tuple[str, ...]


@dataclass(frozen=True)
class FoldPlan:
    folds: Tuple[Fold, ...]

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def make_folds(ds: Dataset) -> FoldPlan:
    """One fold per scene, the scene being the test set"""
    scene_ids = sorted(ds.scene_ids)
    if len(scene_ids) < 2:
        raise EvaluationError(
            f"pause-out cross-validation needs at least 2 scenes, got {len(scene_ids)}"
        )
    return FoldPlan(
        tuple(
            Fold(test, tuple(s for s in scene_ids if s != test)) for test in scene_ids
        )
    )


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr}
        )


def _binary(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if len(scores) != len(labels):
        raise EvaluationError("scores and labels have different lengths")
    if labels.all() or not labels.any():
        raise EvaluationError("ROC/AUC needs both classes")
    return scores, labels


def mann_whitney_auc(scores, labels) -> float:
    """Probability that a positive outranks a negative, ties counting half"""
    scores, labels = _binary(scores, labels)
    ranks = pd.Series(scores).rank(method="average").to_numpy()
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def roc_auc(scores, labels) -> RocCurve:
    """ROC from every distinct score threshold (predict positive when
    ``score >= threshold``), trapezoidal AUC

    >>> roc_auc([0.9, 0.8, 0.3], [True, False, True]).auc
    0.5
    """
    scores, labels = _binary(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    tps = np.cumsum(labels[order])
    fps = np.cumsum(~labels[order])
    # last index of each run of equal scores
    last = np.flatnonzero(np.append(np.diff(sorted_scores) != 0, True))
    tpr = np.concatenate([[0.0], tps[last] / tps[-1]])
    fpr = np.concatenate([[0.0], fps[last] / fps[-1]])
    thresholds = np.concatenate([[np.inf], sorted_scores[last]])
    auc = numeric.trapezoid_auc(fpr, tpr)
    check = mann_whitney_auc(scores, labels)
    if abs(auc - check) > AUC_AGREEMENT:
        raise EvaluationError(f"trapezoid AUC {auc} differs from rank AUC {check}")
    return RocCurve(fpr, tpr, thresholds, auc)


def _roc_points(curve: RocCurve) -> List[List[float]]:
    return [[float(x), float(y)] for x, y in zip(curve.fpr, curve.tpr)]


@dataclass(frozen=True, eq=False)
class FoldResult:
    test_scene: str
    predictions: Optional[pd.DataFrame]
    threshold: Optional[float]
    selection: Dict[str, Any] = field(default_factory=dict)
    failure: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None

    @property
    def accuracy(self) -> Optional[float]:
        if self.predictions is None or len(self.predictions) == 0:
            return None
        p = self.predictions
        return float((p["aware"] == p["label"]).mean() * 100)

    @property
    def roc(self) -> Optional[RocCurve]:
        """ROC of the held-out scene, None when it holds a single class"""
        p = self.predictions
        if p is None or p["label"].nunique() < 2:
            return None
        return roc_auc(p["score"], p["label"])

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"test_scene": self.test_scene}
        if self.failed:
            d["failure"] = self.failure
            return d
        p = self.predictions
        d.update(
            {
                "rows": len(p),
                "accuracy": self.accuracy,
                "threshold": self.threshold,
                "selection": self.selection,
            }
        )
        roc = self.roc
        if roc is not None:
            d["auc"] = roc.auc
            d["roc"] = _roc_points(roc)
        return d


@dataclass(frozen=True, eq=False)
class EvalReport:
    method: str
    seed: Optional[int]
    folds: List[FoldResult]
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def predictions(self) -> pd.DataFrame:
        frames = [f.predictions for f in self.folds if not f.failed]
        if not frames:
            return pd.DataFrame(
                columns=["participant", "scene", "object", "score", "aware", "label"]
            )
        return pd.concat(frames, ignore_index=True)

    @property
    def accuracy(self) -> Optional[float]:
        p = self.predictions
        if len(p) == 0:
            return None
        return float((p["aware"] == p["label"]).mean() * 100)

    @property
    def fold_mean_accuracy(self) -> Optional[float]:
        values = [f.accuracy for f in self.folds if f.accuracy is not None]
        return float(np.mean(values)) if values else None

    @property
    def chance_rate(self) -> Optional[float]:
        p = self.predictions
        if len(p) == 0:
            return None
        share = float(p["label"].mean())
        return max(share, 1 - share) * 100

    @property
    def roc(self) -> Optional[RocCurve]:
        p = self.predictions
        if len(p) == 0 or p["label"].nunique() < 2:
            return None
        return roc_auc(p["score"], p["label"])

    def confusion(self) -> Dict[str, int]:
        p = self.predictions
        aware, label = p["aware"].astype(bool), p["label"].astype(bool)
        return {
            "tp": int((aware & label).sum()),
            "fp": int((aware & ~label).sum()),
            "tn": int((~aware & ~label).sum()),
            "fn": int((~aware & label).sum()),
        }

    def to_dict(self) -> Dict[str, Any]:
        roc = self.roc
        return {
            "method": self.method,
            "seed": self.seed,
            "rows": len(self.predictions),
            "accuracy": self.accuracy,
            "fold_mean_accuracy": self.fold_mean_accuracy,
            "chance_rate": self.chance_rate,
            "auc": None if roc is None else roc.auc,
            "roc": None if roc is None else _roc_points(roc),
            "confusion": self.confusion(),
            "folds": [f.to_dict() for f in self.folds],
            "failed_folds": [f.test_scene for f in self.folds if f.failed],
            "config": self.config,
        }


def labelled_predictions(
    scored: pd.DataFrame, labels: Mapping[Tuple[str, str, str], bool]
) -> pd.DataFrame:
    keys = list(zip(scored["participant"], scored["scene"], scored["object"]))
    keep = np.array([key in labels for key in keys], dtype=bool)
    result = scored[keep].copy()
    result["label"] = [labels[key] for key, k in zip(keys, keep) if k]
    columns = ["participant", "scene", "object", "score", "aware", "label"]
    return result[columns].reset_index(drop=True)


def _baseline1_folds(
    ds: Dataset, plan: FoldPlan, conf: Mapping[str, Any]
) -> List[FoldResult]:
    distances = LabelledDistances.build(ds)
    duration = conf["baseline1_duration_ms"] / 1000.0
    scores = distances.fixation_times(conf["baseline1_radius"])
    frame = pd.DataFrame(distances.keys, columns=["participant", "scene", "object"])
    frame["score"] = scores
    frame["aware"] = scores > duration
    frame["label"] = distances.labels
    return [
        FoldResult(
            fold.test,
            frame[frame["scene"] == fold.test].reset_index(drop=True),
            duration,
        )
        for fold in plan
    ]


def run_cv(
    ds: Dataset,
    method: str,
    conf: Optional[Mapping[str, Any]] = None,
    seed: Optional[int] = None,
    table: Optional[FeatureTable] = None,
    threads: Optional[int] = None,
) -> EvalReport:
    """Pause-out cross-validation of ``method``.

    Each fold trains on every scene but one and scores the targets of the
    held-out scene at the fold's own threshold. A fold whose training labels
    hold a single class is recorded as failed and left out of the pooled
    figures.
    """
    conf = check_config(conf)
    threads = threads or conf["threads"]
    plan = make_folds(ds)
    echo = {k: v for k, v in conf.items() if k != "threads"}
    start_time = datetime.now()
    logger.info("Starting %s cross-validation over %s folds", method, len(plan))

    if method == BASELINE1:
        folds = _baseline1_folds(ds, plan, conf)
        return EvalReport(method, seed, folds, echo)

    spec = method_spec(method, conf)
    labels = ds.label_index()
    if table is None:
        table = extract_all(
            ds,
            SensoryRadii(tuple(conf["radii"])),
            conf["max_distance_deg"],
            threads=threads,
        )

    def run_fold(seq_fold):
        seq_no, fold = seq_fold
        logger.info("Running fold %s (%s/%s)", fold.test, seq_no, len(plan))
        train_labels = {k: v for k, v in labels.items() if k[1] in fold.train}
        train_table = table.select_scenes(fold.train)
        test_table = table.select_scenes([fold.test])
        if fold.test in set(train_table.frame["scene"]) or any(
            k[1] == fold.test for k in train_labels
        ):
            raise PipelineError(f"fold {fold.test}: test scene leaked into training")
        try:
            pipeline = train_pipeline(train_table, train_labels, spec, conf, seed)
        except numeric.SingleClassError as e:
            logger.warning("Fold %s failed: %s", fold.test, e)
            return FoldResult(fold.test, None, None, failure=str(e))
        scored = predict(pipeline, test_table)
        test_labels = {k: v for k, v in labels.items() if k[1] == fold.test}
        return FoldResult(
            fold.test,
            labelled_predictions(scored, test_labels),
            pipeline.threshold,
            pipeline.selection,
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        folds = list(executor.map(run_fold, enumerate(plan, start=1)))

    report = EvalReport(method, seed, folds, echo)
    logger.info(
        "Completed %s cross-validation in %s, pooled accuracy %s",
        method,
        datetime.now() - start_time,
        report.accuracy,
    )
    return report


def baseline1_sweeps(ds: Dataset, conf: Optional[Mapping[str, Any]] = None):
    """Radius and duration sweeps of Baseline 1 over the labelled rows"""
    conf = check_config(conf)
    distances = LabelledDistances.build(ds)
    return {
        mode: baseline1_roc(
            ds,
            mode,
            points=conf["baseline1_points"],
            radius=conf["baseline1_radius"],
            duration_ms=conf["baseline1_duration_ms"],
            distances=distances,
        )
        for mode in ("radius", "duration")
    }


@dataclass(frozen=True, eq=False)
class PcaReport:
    """Contribution and signed loadings of the leading components"""

    table: pd.DataFrame
    feature_names: Tuple[str, ...]

    @property
    def loadings(self) -> pd.DataFrame:
        return self.table[list(self.feature_names)]

    def highlighted(self) -> pd.DataFrame:
        return self.loadings.abs() > LOADING_HIGHLIGHT

    def to_text(self) -> str:
        """Transposed table, features as rows; highlighted loadings end with *"""
        text = self.loadings.T.map(lambda v: f"{v:+.3f}")
        text = text.where(~self.highlighted().T, text + "*")
        header = pd.DataFrame(
            [
                self.table["contribution_pct"].map(lambda v: f"{v:.1f}"),
                self.table["cumulative_pct"].map(lambda v: f"{v:.1f}"),
            ],
            index=["contribution %", "cumulative %"],
        )
        return pd.concat([header, text]).to_string()


def pca_report(
    basis: numeric.PcaBasis, feature_names: Sequence[str], top_k: int
) -> PcaReport:
    if len(feature_names) != basis.components.shape[1]:
        raise EvaluationError("feature names do not match the PCA input dimension")
    if not 1 <= top_k <= basis.k:
        raise EvaluationError(f"top_k must be within 1..{basis.k}, got {top_k}")
    ratios = basis.ratios[:top_k] * 100
    table = pd.DataFrame(
        basis.components[:top_k], columns=list(feature_names)
    )
    table.insert(0, "component", np.arange(1, top_k + 1))
    table.insert(1, "contribution_pct", ratios)
    table.insert(2, "cumulative_pct", np.cumsum(ratios))
    return PcaReport(table, tuple(feature_names))


def fit_report_basis(
    table: FeatureTable, labels: Optional[Mapping] = None
) -> numeric.PcaBasis:
    """Full PCA of the min-max scaled feature columns of the target rows
    (labelled ones only when ``labels`` is given)"""
    targets = table.targets()
    if labels is not None:
        keep = [key in labels for key in targets.keys()]
        targets = FeatureTable(targets.frame[keep].copy(), table.radii)
    X = targets.matrix(targets.columns)
    scaled = numeric.apply_minmax(numeric.fit_minmax(X), X)
    return numeric.fit_pca(scaled, len(targets.columns))


def hv_dwell_loading_trend(
    basis: numeric.PcaBasis, feature_names: Sequence[str], component: int = 2
) -> np.ndarray:
    """Loadings of the ``HV_dwell`` columns on one component, by radius"""
    names = list(feature_names)
    dwell = [n for n in names if n.startswith("HV_dwell_")]
    if not dwell:
        raise EvaluationError("no HV_dwell column among the feature names")
    if not 1 <= component <= basis.k:
        raise EvaluationError(f"component must be within 1..{basis.k}")
    dwell.sort(key=lambda n: float(n.rsplit("_", 1)[1]))
    row = basis.components[component - 1]
    return np.array([row[names.index(n)] for n in dwell])


def comparison_table(
    reports: Mapping[str, EvalReport], include_external: bool = True
) -> pd.DataFrame:
    """Accuracy and AUC per method, one row per method in the usual order"""
    rows = []
    for name, label in TABLE_ROWS:
        if name in reports:
            report = reports[name]
            roc = report.roc
            rows.append(
                {
                    "method": label,
                    "accuracy_pct": report.accuracy,
                    "auc": None if roc is None else roc.auc,
                    "note": "",
                }
            )
        elif include_external and name in EXTERNAL_METHODS:
            rows.append(
                {
                    "method": label,
                    "accuracy_pct": None,
                    "auc": None,
                    "note": EXTERNAL_METHODS[name],
                }
            )
    chance = next(
        (r.chance_rate for r in reports.values() if r.chance_rate is not None), None
    )
    rows.append(
        {"method": "Chance rate", "accuracy_pct": chance, "auc": None, "note": ""}
    )
    return pd.DataFrame(rows, columns=["method", "accuracy_pct", "auc", "note"])


def render_table(table: pd.DataFrame) -> str:
    def fmt(value, spec):
        return "-" if value is None or pd.isna(value) else format(value, spec)

    text = pd.DataFrame(
        {
            "Method": table["method"],
            "Accuracy (%)": [fmt(v, ".1f") for v in table["accuracy_pct"]],
            "AUC": [fmt(v, ".3f") for v in table["auc"]],
            "": table["note"],
        }
    )
    return text.to_string(index=False)
