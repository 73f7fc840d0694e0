# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Numeric primitives: min-max scaling, PCA, class-weighted linear SVM,
logistic regression and score calibration.

Every fit is deterministic: same inputs, same parameters, bit for bit.
Fitted models are immutable and serialize to plain JSON-compatible dicts.
"""

from dataclasses import dataclass, field
import logging
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, List[float], List[List[float]]]


class TrainingError(RuntimeError):
    """A model cannot be fitted on the given data"""


class SingleClassError(TrainingError):
    """Training labels contain a single class"""


class DivergenceError(TrainingError):
    """The training objective became non-finite"""


def _as_matrix(X: ArrayLike) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MinMaxScaler:
    mins: np.ndarray
    maxs: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {"min": self.mins.tolist(), "max": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MinMaxScaler":
        return cls(_frozen(d["min"]), _frozen(d["max"]))


def fit_minmax(X: ArrayLike) -> MinMaxScaler:
    X = _as_matrix(X)
    if X.shape[0] == 0:
        raise TrainingError("cannot fit a scaler on an empty matrix")
    return MinMaxScaler(_frozen(X.min(axis=0)), _frozen(X.max(axis=0)))


def apply_minmax(scaler: MinMaxScaler, X: ArrayLike) -> np.ndarray:
    """Rescale columns to the training range; constant columns map to 0 and
    out-of-range values are not clipped

    >>> scaler = fit_minmax([[0.0], [10.0]])
    >>> apply_minmax(scaler, [[12.0]]).tolist()
    [[1.2]]
    """
    X = _as_matrix(X)
    span = scaler.maxs - scaler.mins
    constant = span == 0
    scaled = (X - scaler.mins) / np.where(constant, 1.0, span)
    scaled[:, constant] = 0.0
    return scaled


@dataclass(frozen=True, eq=False)
class PcaBasis:
    """Principal axes of a centered training matrix.

    ``components`` holds the first k eigenvectors as rows; ``eigenvalues``
    keeps the full spectrum so that ratios of every component are known.
    """

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def all_ratios(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        if total <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total

    @property
    def ratios(self) -> np.ndarray:
        return self.all_ratios[: self.k]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PcaBasis":
        components = _frozen(d["components"]).reshape(-1, len(d["mean"]))
        return cls(_frozen(d["mean"]), components, _frozen(d["eigenvalues"]))


def fit_pca(X: ArrayLike, k: int) -> PcaBasis:
    X = _as_matrix(X)
    n, d = X.shape
    if not 1 <= k <= d:
        raise TrainingError(f"PCA needs 1 <= k <= {d}, got k={k}")
    if n < 2:
        raise TrainingError(f"PCA needs at least 2 rows, got {n}")
    if not np.all(np.isfinite(X)):
        raise TrainingError("PCA input contains non-finite values")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(-values, kind="stable")
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order].T
    # sign: largest-magnitude entry of each component is positive
    pivots = vectors[np.arange(d), np.argmax(np.abs(vectors), axis=1)]
    vectors = vectors * np.where(pivots < 0, -1.0, 1.0)[:, None]
    return PcaBasis(_frozen(mean), _frozen(vectors[:k]), _frozen(values))


def project(basis: PcaBasis, X: ArrayLike) -> np.ndarray:
    return (_as_matrix(X) - basis.mean) @ basis.components.T


def _check_binary(y: np.ndarray, classes) -> None:
    present = set(np.unique(y).tolist())
    if not present <= set(classes):
        raise TrainingError(
            f"labels must be in {sorted(classes)}, got {sorted(present)}"
        )
    if len(present) < 2:
        only = present.pop() if present else None
        raise SingleClassError(f"training labels contain the single class {only}")


def balanced_class_weights(y: ArrayLike) -> Dict[int, float]:
    """Class weights inversely proportional to class frequencies,
    ``n_total / (2 * n_class)``

    >>> balanced_class_weights([1, 1, 1, -1])
    {-1: 2.0, 1: 0.6666666666666666}
    """
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise SingleClassError("class weights need two classes")
    return {
        int(c): len(y) / (len(classes) * int(count))
        for c, count in zip(classes, counts)
    }


def _sample_weights(y: np.ndarray, class_weights: Mapping[int, float]) -> np.ndarray:
    try:
        return np.array([class_weights[int(label)] for label in y], dtype=float)
    except KeyError as e:
        raise TrainingError(f"no class weight for label {e.args[0]}") from None


@dataclass(frozen=True, eq=False)
class LinearSvm:
    """Linear decision function ``x . weights + bias``"""

    weights: np.ndarray
    bias: float
    c: float
    class_weights: Dict[int, float]
    objective: float
    n_iter: int
    converged: bool
    seed: Optional[int] = None
    # best objective after each iteration, not serialized
    trace: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "c": self.c,
            "class_weights": {str(k): v for k, v in self.class_weights.items()},
            "objective": self.objective,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LinearSvm":
        return cls(
            weights=_frozen(d["weights"]),
            bias=float(d["bias"]),
            c=float(d["c"]),
            class_weights={int(k): float(v) for k, v in d["class_weights"].items()},
            objective=float(d["objective"]),
            n_iter=int(d["n_iter"]),
            converged=bool(d["converged"]),
            seed=d.get("seed"),
        )


def svm_objective(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, s: np.ndarray, c: float
) -> float:
    """``1/2 |w|^2 + C sum s_i hinge(y_i (x_i . w + b))``, the intercept is
    not penalized"""
    hinge = np.maximum(0.0, 1.0 - y * (X @ w + b))
    return float(0.5 * w @ w + c * (s @ hinge))


def train_svm(
    X: ArrayLike,
    y: ArrayLike,
    class_weights: Optional[Mapping[int, float]] = None,
    c: float = 1.0,
    seed: Optional[int] = None,
    max_iter: int = 20000,
    tol: float = 1e-8,
) -> LinearSvm:
    """Fit a class-weighted linear SVM with labels in {-1, +1}.

    Full-batch subgradient descent with step ``1/sqrt(t)`` on the objective
    divided by ``C * sum(s_i)``, run on column-centered inputs; the intercept
    has its own unpenalized gradient. Stops when the objective changes by less
    than ``tol`` between iterations, and returns the iterate with the lowest
    objective. The solver draws no random numbers, ``seed`` is only recorded.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    if len(y) != X.shape[0]:
        raise TrainingError("X and y have different lengths")
    _check_binary(y, (-1, 1))
    if class_weights is None:
        class_weights = balanced_class_weights(y)
    s = _sample_weights(y, class_weights)
    # same minimizer with b shifted by mean . w, since b is free
    mean = X.mean(axis=0)
    Xc = X - mean
    total = float(s.sum())
    lam = 1.0 / (c * total)
    sy = s * y / total

    w = np.zeros(Xc.shape[1])
    b = 0.0
    best_w, best_b = w, b
    best = previous = svm_objective(w, b, Xc, y, s, c)
    trace = np.empty(max_iter)
    converged = False
    n_iter = 0
    for t in range(1, max_iter + 1):
        active = y * (Xc @ w + b) < 1.0
        step = 1.0 / np.sqrt(t)
        w = w - step * (lam * w - sy[active] @ Xc[active])
        b = b + step * float(sy[active].sum())
        current = svm_objective(w, b, Xc, y, s, c)
        if not np.isfinite(current):
            raise DivergenceError(f"SVM objective is {current} at iteration {t}")
        if current < best:
            best, best_w, best_b = current, w, b
        trace[t - 1] = best
        n_iter = t
        if abs(current - previous) < tol:
            converged = True
            break
        previous = current
    if not converged:
        logger.debug("SVM stopped at max_iter=%s, objective %s", max_iter, best)
    return LinearSvm(
        weights=_frozen(best_w),
        bias=float(best_b - mean @ best_w),
        c=float(c),
        class_weights={int(k): float(v) for k, v in class_weights.items()},
        objective=best,
        n_iter=n_iter,
        converged=converged,
        seed=seed,
        trace=_frozen(trace[:n_iter]),
    )


def decision(svm: LinearSvm, X: ArrayLike) -> np.ndarray:
    """Signed margins of the rows of ``X``"""
    return _as_matrix(X) @ svm.weights + svm.bias


def sigmoid_score(margin):
    """Logistic function, computed without overflow

    >>> float(sigmoid_score(0.0))
    0.5
    """
    m = np.asarray(margin, dtype=float)
    e = np.exp(-np.abs(m))
    p = np.where(m >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return p if p.ndim else float(p)


def trapezoid_auc(fpr: ArrayLike, tpr: ArrayLike) -> float:
    """Area under a ROC polyline, points sorted by increasing FPR

    >>> trapezoid_auc([0.0, 0.0, 1.0], [0.0, 1.0, 1.0])
    1.0
    """
    return float(np.trapezoid(np.asarray(tpr, float), np.asarray(fpr, float)))


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2: float
    objective: float
    n_iter: int
    seed: Optional[int] = None

    def predict_proba(self, X: ArrayLike) -> np.ndarray:
        return sigmoid_score(_as_matrix(X) @ self.weights + self.bias)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "l2": self.l2,
            "objective": self.objective,
            "n_iter": self.n_iter,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LogisticModel":
        return cls(
            weights=_frozen(d["weights"]),
            bias=float(d["bias"]),
            l2=float(d["l2"]),
            objective=float(d["objective"]),
            n_iter=int(d["n_iter"]),
            seed=d.get("seed"),
        )


def logistic_objective(
    params: np.ndarray, X: np.ndarray, y: np.ndarray, s: np.ndarray, l2: float
) -> float:
    """Weighted mean negative log-likelihood plus ``l2/2 |w|^2``.

    ``params`` is ``[w..., b]``; the intercept is not penalized.
    """
    z = X @ params[:-1] + params[-1]
    nll = np.logaddexp(0.0, z) - y * z
    w = params[:-1]
    return float(s @ nll / s.sum() + 0.5 * l2 * (w @ w))


def logistic_gradient(
    params: np.ndarray, X: np.ndarray, y: np.ndarray, s: np.ndarray, l2: float
) -> np.ndarray:
    z = X @ params[:-1] + params[-1]
    r = s * (sigmoid_score(z) - y) / s.sum()
    grad = np.append(r @ X, r.sum())
    grad[:-1] += l2 * params[:-1]
    return grad


def _logistic_hessian(params, X, s, l2) -> np.ndarray:
    p = sigmoid_score(X @ params[:-1] + params[-1])
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    h = (Xa * (s * p * (1.0 - p) / s.sum())[:, None]).T @ Xa
    h[np.arange(X.shape[1]), np.arange(X.shape[1])] += l2
    return h


def train_logistic(
    X: ArrayLike,
    y: ArrayLike,
    class_weights: Optional[Mapping[int, float]] = None,
    seed: Optional[int] = None,
    l2: float = 1e-4,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> LogisticModel:
    """Fit a class-weighted L2-penalized logistic regression, labels in {0, 1},
    with Newton steps halved until the objective decreases"""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    if len(y) != X.shape[0]:
        raise TrainingError("X and y have different lengths")
    _check_binary(y, (0, 1))
    if class_weights is None:
        class_weights = balanced_class_weights(y)
    s = _sample_weights(y, class_weights)

    params = np.zeros(X.shape[1] + 1)
    current = logistic_objective(params, X, y, s, l2)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        grad = logistic_gradient(params, X, y, s, l2)
        hessian = _logistic_hessian(params, X, s, l2)
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.pinv(hessian) @ grad
        scale = 1.0
        while True:
            candidate = params - scale * step
            value = logistic_objective(candidate, X, y, s, l2)
            if value <= current or scale < 1e-10:
                break
            scale /= 2
        if not np.isfinite(value):
            raise DivergenceError(
                f"logistic objective is {value} at iteration {n_iter}"
            )
        done = np.max(np.abs(candidate - params)) < tol or current - value < tol * tol
        params, current = candidate, value
        if done:
            break
    else:
        logger.debug("Logistic regression stopped at max_iter=%s", max_iter)
    return LogisticModel(
        weights=_frozen(params[:-1]),
        bias=float(params[-1]),
        l2=float(l2),
        objective=current,
        n_iter=n_iter,
        seed=seed,
    )
