import json
import math

import numpy as np
import pytest

from referral_forge.model import (
    LogisticModel,
    ModelFormatError,
    RequestScorer,
    critical_lambda,
    default_lambda_grid,
    grid_search_cv,
    load_model,
    predict_proba,
    predict_proba_matrix,
    save_model,
    train_l1,
    _smooth_grad,
    _smooth_loss,
)
from oracles import newton_logistic


def make_problem(seed=0, n=120, d=8, sparse_truth=True):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    w = rng.normal(size=d)
    if sparse_truth:
        w[rng.random(d) < 0.4] = 0.0
    z = X @ w + 0.3
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(float)
    if y.min() == y.max():  # ensure both classes
        y[0] = 1.0 - y[0]
    return X, y


class TestTrainL1:
    def test_lambda_large_gives_base_rate_bias(self):
        X, y = make_problem(seed=1)
        lam = 10.0 * critical_lambda(X, y)
        model = train_l1(X, y, lam)
        assert np.all(model.weights == 0.0)
        base = y.mean()
        assert model.bias == pytest.approx(math.log(base / (1 - base)), abs=1e-6)

    def test_lambda_zero_matches_newton_oracle(self):
        X, y = make_problem(seed=2, n=200, d=5)
        model = train_l1(X, y, 0.0)
        w_ref, b_ref = newton_logistic(X, y)
        assert np.max(np.abs(model.weights - w_ref)) < 1e-3
        assert abs(model.bias - b_ref) < 1e-3

    def test_label_flip_negates_parameters(self):
        X, y = make_problem(seed=3)
        lam = 0.05 * critical_lambda(X, y)
        m1 = train_l1(X, y, lam)
        m2 = train_l1(X, 1.0 - y, lam)
        assert np.max(np.abs(m1.weights + m2.weights)) < 1e-5
        assert abs(m1.bias + m2.bias) < 1e-5

    def test_objective_monotone_nonincreasing(self):
        X, y = make_problem(seed=4)
        _, history = train_l1(X, y, 0.02, return_history=True)
        diffs = np.diff(history)
        assert np.all(diffs <= 1e-12)

    def test_kkt_conditions(self):
        X, y = make_problem(seed=5)
        lam = 0.1 * critical_lambda(X, y)
        model = train_l1(X, y, lam)
        gw, gb = _smooth_grad(X, y, model.weights, model.bias)
        for j in range(X.shape[1]):
            if model.weights[j] == 0.0:
                assert abs(gw[j]) <= lam + 1e-4
            else:
                assert abs(gw[j] + lam * np.sign(model.weights[j])) <= 1e-4
        assert abs(gb) <= 1e-6

    def test_gradient_matches_finite_differences(self):
        X, y = make_problem(seed=6, n=60, d=4)
        rng = np.random.default_rng(7)
        for _ in range(10):
            w = rng.normal(size=4)
            b = float(rng.normal())
            gw, gb = _smooth_grad(X, y, w, b)
            eps = 1e-6
            for j in range(4):
                ej = np.zeros(4)
                ej[j] = eps
                fd = (_smooth_loss(X, y, w + ej, b) - _smooth_loss(X, y, w - ej, b)) / (2 * eps)
                assert abs(gw[j] - fd) < 1e-5 * max(1.0, abs(fd))
            fd_b = (_smooth_loss(X, y, w, b + eps) - _smooth_loss(X, y, w, b - eps)) / (2 * eps)
            assert abs(gb - fd_b) < 1e-5 * max(1.0, abs(fd_b))

    def test_sparsity_monotone_in_lambda(self):
        X, y = make_problem(seed=8, n=150, d=12)
        lam_c = critical_lambda(X, y)
        grid = lam_c * np.logspace(-3, 0, 8)
        nnz = [int(np.sum(train_l1(X, y, lam).weights != 0)) for lam in grid]
        assert all(a >= b for a, b in zip(nnz, nnz[1:]))

    def test_single_class_errors(self):
        X = np.ones((4, 2))
        with pytest.raises(ValueError, match="single class"):
            train_l1(X, np.ones(4), 0.1)

    def test_non_finite_features_error(self):
        X = np.ones((4, 2))
        X[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            train_l1(X, np.array([0, 1, 0, 1.0]), 0.1)


class TestGridSearchCv:
    def test_single_value_grid_selected(self):
        X, y = make_problem(seed=9)
        report = grid_search_cv(X, y, np.array([0.02]), k=3, seed=0)
        assert report.selected_lambda == 0.02

    def test_duplicate_grid_values_identical_scores(self):
        X, y = make_problem(seed=10)
        report = grid_search_cv(X, y, np.array([0.05, 0.05]), k=3, seed=0)
        assert np.allclose(report.mean_scores[0], report.mean_scores[1], equal_nan=True)
        assert report.selected_lambda == 0.05

    def test_selected_is_argmax(self):
        X, y = make_problem(seed=11, n=200)
        grid = default_lambda_grid(X, y, size=5)
        report = grid_search_cv(X, y, grid, k=3, seed=0)
        best_mean = np.nanmax(report.mean_scores)
        chosen = report.mean_scores[list(report.grid).index(report.selected_lambda)]
        assert chosen == pytest.approx(best_mean)

    def test_tie_breaks_to_larger_lambda(self):
        X, y = make_problem(seed=12)
        # Far above the critical lambda every model is the null model, so
        # all grid points score identically and the largest must win.
        lam_c = critical_lambda(X, y)
        grid = np.array([2 * lam_c, 5 * lam_c, 10 * lam_c])
        report = grid_search_cv(X, y, grid, k=3, seed=0)
        assert report.selected_lambda == pytest.approx(10 * lam_c)

    def test_deterministic_under_seed(self):
        X, y = make_problem(seed=13)
        r1 = grid_search_cv(X, y, np.array([0.01, 0.1]), k=4, seed=5)
        r2 = grid_search_cv(X, y, np.array([0.01, 0.1]), k=4, seed=5)
        assert np.array_equal(r1.fold_scores, r2.fold_scores, equal_nan=True)

    def test_k_below_two_errors(self):
        X, y = make_problem(seed=14)
        with pytest.raises(ValueError):
            grid_search_cv(X, y, np.array([0.1]), k=1)


class TestPredictProba:
    def test_zero_model_gives_half(self):
        model = LogisticModel(weights=np.zeros(3), bias=0.0, lam=0.0, encoder_id="t")
        assert predict_proba(model, np.ones(3)) == 0.5

    def test_sigmoid_identity(self):
        model = LogisticModel(weights=np.array([1.0]), bias=0.0, lam=0.0, encoder_id="t")
        assert predict_proba(model, np.array([math.log(3)])) == pytest.approx(0.75)

    def test_monotone_in_positive_weight(self):
        model = LogisticModel(weights=np.array([2.0, -1.0]), bias=0.1, lam=0.0, encoder_id="t")
        p1 = predict_proba(model, np.array([0.0, 0.5]))
        p2 = predict_proba(model, np.array([1.0, 0.5]))
        assert p2 > p1

    def test_dimension_mismatch(self):
        model = LogisticModel(weights=np.zeros(3), bias=0.0, lam=0.0, encoder_id="t")
        with pytest.raises(ValueError, match="dimension"):
            predict_proba(model, np.zeros(4))

    def test_matrix_matches_scalar(self):
        model = LogisticModel(weights=np.array([1.0, -2.0]), bias=0.3, lam=0.0, encoder_id="t")
        X = np.array([[0.1, 0.2], [1.0, -1.0]])
        batch = predict_proba_matrix(model, X)
        assert batch[0] == pytest.approx(predict_proba(model, X[0]))
        assert batch[1] == pytest.approx(predict_proba(model, X[1]))


class TestModelPersistence:
    def test_round_trip_exact(self, tmp_path):
        X, y = make_problem(seed=15)
        model = train_l1(X, y, 0.03)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert (loaded.weights == model.weights).all()
        assert loaded.bias == model.bias
        x = X[0]
        assert predict_proba(loaded, x) == predict_proba(model, x)

    def test_corrupted_file_is_parse_error(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json")
        with pytest.raises(ModelFormatError, match="cannot parse"):
            load_model(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format_version": 99, "weights": [], "bias": 0, "lambda": 0}))
        with pytest.raises(ModelFormatError, match="version"):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model(tmp_path / "nope.json")


class TestRequestScorer:
    def test_score_uses_combined_text(self):
        model = LogisticModel(weights=np.array([1.0]), bias=0.0, lam=0.0, encoder_id="len")
        scorer = RequestScorer(model=model, encode=lambda text: np.array([float(len(text))]))
        assert scorer.score("ab", "cd") == predict_proba(model, np.array([5.0]))  # "ab\ncd"
