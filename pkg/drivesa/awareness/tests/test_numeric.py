# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import json

import numpy as np
import pytest

from drivesa.awareness.naive import jacobi_eigenvalues
from drivesa.awareness.numeric import (
    LinearSvm,
    LogisticModel,
    MinMaxScaler,
    PcaBasis,
    SingleClassError,
    TrainingError,
    apply_minmax,
    balanced_class_weights,
    decision,
    fit_minmax,
    fit_pca,
    logistic_gradient,
    logistic_objective,
    project,
    sigmoid_score,
    svm_objective,
    train_logistic,
    train_svm,
    trapezoid_auc,
)


def separable(seed=0, n=60):
    rng = np.random.default_rng(seed)
    pos = rng.normal([2.0, 2.0], 0.5, (n, 2))
    neg = rng.normal([-2.0, -2.0], 0.5, (n // 3, 2))
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(n), -np.ones(n // 3)])
    return X, y


def test_minmax_scaling():
    X = np.array([[0.0, 5.0, 1.0], [10.0, 5.0, 3.0], [5.0, 5.0, 2.0]])
    scaler = fit_minmax(X)
    scaled = apply_minmax(scaler, X)
    assert scaled[:, 0].tolist() == [0.0, 1.0, 0.5]
    assert scaled[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert scaled.min() >= 0.0 and scaled.max() <= 1.0
    # unseen data is not clipped
    assert apply_minmax(scaler, [[-10.0, 7.0, 4.0]]).tolist() == [[-1.0, 0.0, 1.5]]


def test_minmax_empty():
    with pytest.raises(TrainingError):
        fit_minmax(np.empty((0, 3)))


def test_pca_matches_jacobi():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 6)) @ rng.normal(size=(6, 6))
    basis = fit_pca(X, 3)
    cov = np.cov(X, rowvar=False)
    expected = jacobi_eigenvalues(cov.tolist())
    np.testing.assert_allclose(basis.eigenvalues, expected, rtol=1e-8, atol=1e-10)
    assert basis.k == 3
    assert basis.all_ratios.sum() == pytest.approx(1.0)
    assert list(basis.ratios) == sorted(basis.ratios, reverse=True)


def test_pca_components_orthonormal_and_signed():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 5))
    basis = fit_pca(X, 5)
    np.testing.assert_allclose(
        basis.components @ basis.components.T, np.eye(5), atol=1e-10
    )
    for component in basis.components:
        assert component[np.argmax(np.abs(component))] > 0


def test_pca_projection_is_centered():
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(30, 4))
    basis = fit_pca(X, 2)
    Z = project(basis, X)
    assert Z.shape == (30, 2)
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(Z.var(axis=0, ddof=1), basis.eigenvalues[:2])


@pytest.mark.parametrize("k", [0, 5])
def test_pca_bad_k(k):
    with pytest.raises(TrainingError):
        fit_pca(np.ones((10, 4)), k)


def test_pca_rejects_nan():
    X = np.ones((5, 2))
    X[2, 1] = np.nan
    with pytest.raises(TrainingError):
        fit_pca(X, 1)


def test_pca_constant_matrix():
    basis = fit_pca(np.ones((6, 3)), 2)
    assert basis.all_ratios.tolist() == [0.0, 0.0, 0.0]


def test_balanced_weights():
    w = balanced_class_weights([1, 1, 1, -1])
    assert w[1] * 3 == pytest.approx(w[-1] * 1)
    with pytest.raises(SingleClassError):
        balanced_class_weights([1, 1])


def test_svm_separates():
    X, y = separable()
    svm = train_svm(X, y, c=1.0, max_iter=3000)
    assert np.all(np.sign(decision(svm, X)) == y)
    assert svm.class_weights == balanced_class_weights(y)


def test_svm_objective_never_increases():
    X, y = separable(1)
    svm = train_svm(X, y, max_iter=500)
    assert np.all(np.diff(svm.trace) <= 0)
    s = np.array([svm.class_weights[int(v)] for v in y])
    value = svm_objective(svm.weights, svm.bias, X, y, s, svm.c)
    assert value == pytest.approx(svm.objective)
    assert svm.objective <= svm_objective(np.zeros(2), 0.0, X, y, s, svm.c)


def test_svm_objective_descent_on_random_inputs():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(4, 12))
        X = rng.normal(size=(n, 2)) * rng.uniform(0.1, 10.0)
        y = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
        y[:2] = [-1.0, 1.0]
        svm = train_svm(X, y, c=float(rng.uniform(0.1, 10.0)), max_iter=20)
        assert np.all(np.diff(svm.trace) <= 0)
        s = np.array([svm.class_weights[int(v)] for v in y])
        start = svm_objective(np.zeros(2), 0.0, X, y, s, svm.c)
        assert svm.objective <= start


def test_svm_bias_is_not_penalized():
    """separable data far from the origin keeps both classes apart"""
    X = np.array([[100.0], [100.0], [101.0], [101.0]])
    y = np.array([-1.0, -1.0, 1.0, 1.0])
    svm = train_svm(X, y, c=1.0)
    assert np.sign(decision(svm, X)).tolist() == y.tolist()
    assert svm.weights[0] == pytest.approx(2.0, abs=5e-3)
    assert svm.bias == pytest.approx(-201.0, abs=0.5)
    assert svm.objective == pytest.approx(2.0, abs=1e-5)
    assert svm.converged


def test_decision_is_affine():
    X, y = separable(6)
    svm = train_svm(X, y, max_iter=300)
    rng = np.random.default_rng(12)
    for _ in range(1000):
        x1, x2 = rng.normal(0, 5, (2, 2))
        alpha = rng.uniform(-2, 2)
        mixed = decision(svm, [alpha * x1 + (1 - alpha) * x2])[0]
        expected = alpha * decision(svm, [x1])[0] + (1 - alpha) * decision(
            svm, [x2]
        )[0]
        assert mixed == pytest.approx(expected, abs=1e-10)


def test_svm_is_deterministic():
    X, y = separable(2)
    a = train_svm(X, y, seed=1, max_iter=800)
    b = train_svm(X, y, seed=2, max_iter=800)
    assert a.weights.tolist() == b.weights.tolist()
    assert a.bias == b.bias


def test_svm_single_class():
    with pytest.raises(SingleClassError):
        train_svm(np.zeros((4, 2)), np.ones(4))


def test_svm_bad_labels():
    with pytest.raises(TrainingError):
        train_svm(np.zeros((4, 2)), [0, 1, 0, 1])


def test_svm_class_weights_shift_the_boundary():
    """up-weighting a class pushes the boundary away from it"""
    rng = np.random.default_rng(7)
    X = np.concatenate([rng.normal(1.0, 1.0, 80), rng.normal(-1.0, 1.0, 80)])
    y = np.concatenate([np.ones(80), -np.ones(80)])
    plain = train_svm(X, y, class_weights={1: 1.0, -1: 1.0}, max_iter=3000)
    heavy = train_svm(X, y, class_weights={1: 5.0, -1: 1.0}, max_iter=3000)
    positives = lambda svm: int((decision(svm, X) > 0).sum())  # noqa: E731
    assert positives(heavy) > positives(plain)


def test_svm_serialization(tmp_path):
    X, y = separable(3)
    svm = train_svm(X, y, seed=4, max_iter=200)
    d = json.loads(json.dumps(svm.to_dict()))
    other = LinearSvm.from_dict(d)
    assert other.weights.tolist() == svm.weights.tolist()
    assert other.seed == 4 and other.class_weights == svm.class_weights
    assert decision(other, X).tolist() == decision(svm, X).tolist()


def test_fitted_models_are_read_only():
    X, y = separable(4)
    svm = train_svm(X, y, max_iter=50)
    with pytest.raises(ValueError):
        svm.weights[0] = 1.0
    scaler = fit_minmax(X)
    with pytest.raises(ValueError):
        scaler.mins[0] = 1.0


def test_sigmoid():
    assert sigmoid_score(0.0) == 0.5
    big = sigmoid_score(np.array([-1000.0, 1000.0]))
    assert big.tolist() == [0.0, 1.0]
    m = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(sigmoid_score(m) + sigmoid_score(-m), 1.0)
    assert np.all(np.diff(sigmoid_score(m)) > 0)


def test_trapezoid_auc():
    assert trapezoid_auc([0, 1], [0, 1]) == 0.5
    assert trapezoid_auc([0, 0.5, 1], [0, 1, 1]) == 0.75


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 3))
    y = (rng.uniform(size=20) > 0.5).astype(float)
    s = rng.uniform(0.5, 2.0, 20)
    params = rng.normal(size=4)
    grad = logistic_gradient(params, X, y, s, 0.1)
    eps = 1e-6
    for i in range(4):
        step = np.zeros(4)
        step[i] = eps
        numeric = (
            logistic_objective(params + step, X, y, s, 0.1)
            - logistic_objective(params - step, X, y, s, 0.1)
        ) / (2 * eps)
        assert grad[i] == pytest.approx(numeric, abs=1e-6)


def test_logistic_fit():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] - X[:, 1] + rng.normal(0, 0.3, 200) > 0).astype(float)
    model = train_logistic(X, y, seed=3)
    assert model.weights[0] > 0 > model.weights[1]
    assert ((model.predict_proba(X) > 0.5) == y).mean() > 0.9
    s = np.array([balanced_class_weights(y)[int(v)] for v in y])
    params = np.append(model.weights, model.bias)
    grad = logistic_gradient(params, X, y, s, model.l2)
    assert np.abs(grad).max() < 1e-6


def test_logistic_round_trip():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 2))
    y = (X[:, 0] > 0).astype(float)
    model = train_logistic(X, y)
    other = LogisticModel.from_dict(json.loads(json.dumps(model.to_dict())))
    assert other.predict_proba(X).tolist() == model.predict_proba(X).tolist()


def test_scaler_and_basis_round_trip():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(12, 4))
    scaler = MinMaxScaler.from_dict(json.loads(json.dumps(fit_minmax(X).to_dict())))
    basis = fit_pca(X, 2)
    again = PcaBasis.from_dict(json.loads(json.dumps(basis.to_dict())))
    assert apply_minmax(scaler, X).tolist() == apply_minmax(fit_minmax(X), X).tolist()
    assert project(again, X).tolist() == project(basis, X).tolist()


def test_pca_on_wide_matrix():
    rng = np.random.default_rng(13)
    X = rng.normal(size=(50, 30)) * rng.uniform(0.2, 3.0, 30)
    basis = fit_pca(X, 30)
    expected = jacobi_eigenvalues(np.cov(X, rowvar=False).tolist())
    np.testing.assert_allclose(basis.eigenvalues, expected, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(
        basis.components @ basis.components.T, np.eye(30), atol=1e-8
    )
    # all components: exact reconstruction of the centered matrix
    centered = X - X.mean(axis=0)
    np.testing.assert_allclose(
        project(basis, X) @ basis.components, centered, atol=1e-8
    )


def test_pca_projection_is_variance_maximal():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(50, 8)) @ rng.normal(size=(8, 8))
    k = 3
    basis = fit_pca(X, k)
    centered = X - X.mean(axis=0)
    best = np.var(centered @ basis.components.T, axis=0, ddof=1).sum()
    for _ in range(100):
        q, _ = np.linalg.qr(rng.normal(size=(8, k)))
        assert np.var(centered @ q, axis=0, ddof=1).sum() <= best + 1e-9


def test_logistic_gradient_on_random_inputs():
    rng = np.random.default_rng(15)
    eps = 1e-6
    for _ in range(1000):
        n, d = int(rng.integers(3, 15)), int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        y = (rng.uniform(size=n) > 0.5).astype(float)
        s = rng.uniform(0.5, 2.0, n)
        params = rng.normal(size=d + 1)
        l2 = float(rng.uniform(0.0, 0.5))
        grad = logistic_gradient(params, X, y, s, l2)
        for i in range(d + 1):
            step = np.zeros(d + 1)
            step[i] = eps
            numeric = (
                logistic_objective(params + step, X, y, s, l2)
                - logistic_objective(params - step, X, y, s, l2)
            ) / (2 * eps)
            assert grad[i] == pytest.approx(numeric, rel=1e-6, abs=1e-8)


def test_logistic_matches_gradient_descent():
    rng = np.random.default_rng(16)
    X = rng.normal(size=(150, 2))
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(0, 1.0, 150) > 0.3).astype(float)
    model = train_logistic(X, y)
    s = np.array([balanced_class_weights(y)[int(v)] for v in y])
    # step 1/L, L bounding the Hessian of the weighted mean loss
    Xa = np.hstack([X, np.ones((150, 1))])
    lipschitz = 0.25 * np.linalg.eigvalsh((Xa * (s / s.sum())[:, None]).T @ Xa)[-1]
    params = np.zeros(3)
    for _ in range(20000):
        params = params - logistic_gradient(params, X, y, s, model.l2) / (
            lipschitz + model.l2
        )
    np.testing.assert_allclose(model.weights, params[:-1], atol=1e-6)
    assert model.bias == pytest.approx(params[-1], abs=1e-6)
