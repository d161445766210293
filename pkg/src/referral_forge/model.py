"""Reward-model head: L1-penalized logistic regression over encoder
vectors, with cross-validated penalty selection on AUROC.

The solver is proximal gradient with backtracking line search and a
monotone acceleration step (a momentum candidate is only accepted when it
does not increase the objective), followed by a short plain-step tail and
an exact 1-D Newton polish of the unpenalized bias. The objective is
nonincreasing across iterations by construction.
"""

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .metrics import auroc
from .text import combine_title_body

MODEL_FORMAT_VERSION = 1


class ModelFormatError(Exception):
    pass


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    lam: float
    encoder_id: str
    schema_version: str = ""

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ValueError("model parameters must be finite")


@dataclass
class CvReport:
    grid: np.ndarray
    fold_scores: np.ndarray  # (len(grid), k) with NaN for skipped folds
    mean_scores: np.ndarray
    selected_lambda: float


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _smooth_loss(X, y, w, b) -> float:
    z = X @ w + b
    # mean log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _smooth_grad(X, y, w, b):
    g = _sigmoid(X @ w + b) - y
    return X.T @ g / len(y), float(np.mean(g))


def _objective(X, y, w, b, lam) -> float:
    return _smooth_loss(X, y, w, b) + lam * float(np.abs(w).sum())


def _soft(v: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _backtracked_step(X, y, w, b, lam, step):
    """One prox step from (w, b) with backtracking; returns the new point,
    the accepted step size, and the new smooth loss."""
    f0 = _smooth_loss(X, y, w, b)
    gw, gb = _smooth_grad(X, y, w, b)
    while True:
        w_new = _soft(w - step * gw, step * lam)
        b_new = b - step * gb
        dw = w_new - w
        db = b_new - b
        quad = f0 + gw @ dw + gb * db + (dw @ dw + db * db) / (2.0 * step)
        f_new = _smooth_loss(X, y, w_new, b_new)
        if f_new <= quad + 1e-12:
            return w_new, b_new, step, f_new
        step *= 0.5
        if step < 1e-16:
            return w, b, step, f0


def _polish_bias(X, y, w, b) -> float:
    """Exact 1-D Newton on the bias (w fixed); only accepts decreases."""
    for _ in range(50):
        z = X @ w + b
        p = _sigmoid(z)
        grad = float(np.mean(p - y))
        hess = float(np.mean(p * (1.0 - p)))
        if hess <= 1e-12 or abs(grad) < 1e-14:
            break
        delta = grad / hess
        f0 = _smooth_loss(X, y, w, b)
        t = 1.0
        while t > 1e-12:
            b_new = b - t * delta
            if _smooth_loss(X, y, w, b_new) <= f0:
                break
            t *= 0.5
        else:
            break
        if abs(b_new - b) < 1e-14:
            break
        b = b_new
    return b


def train_l1(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    encoder_id: str = "",
    tol: float = 1e-8,
    max_iter: int = 10_000,
    return_history: bool = False,
):
    """Minimize mean logistic loss + lam * ||w||_1 (bias unpenalized).

    Raises on single-class labels or non-finite features.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    if len(y) < 2:
        raise ValueError("need at least 2 examples")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite features")
    if len(np.unique(y)) < 2:
        raise ValueError("labels contain a single class")
    if lam < 0:
        raise ValueError("lambda must be >= 0")

    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    w_prev = w.copy()
    b_prev = b
    t_momentum = 1.0
    # Lipschitz estimate for the initial step: ||X||_F^2 / (4n) bounds the
    # logistic Hessian spectral norm loosely.
    lip = float((X * X).sum()) / (4.0 * n) + 0.25
    step = 1.0 / lip

    obj = _objective(X, y, w, b, lam)
    history = [obj]

    for _ in range(max_iter):
        beta = (t_momentum - 1.0) / ((1.0 + math.sqrt(1.0 + 4.0 * t_momentum**2)) / 2.0)
        t_momentum = (1.0 + math.sqrt(1.0 + 4.0 * t_momentum**2)) / 2.0

        vw = w + beta * (w - w_prev)
        vb = b + beta * (b - b_prev)
        cw, cb, step, _ = _backtracked_step(X, y, vw, vb, lam, step * 1.25)
        cand_obj = _objective(X, y, cw, cb, lam)
        if cand_obj > obj:
            # Monotone fallback: plain step from the current point.
            cw, cb, step, _ = _backtracked_step(X, y, w, b, lam, step)
            cand_obj = _objective(X, y, cw, cb, lam)
            t_momentum = 1.0
        w_prev, b_prev = w, b
        w, b = cw, cb
        delta = obj - cand_obj
        obj = cand_obj
        history.append(obj)
        if 0 <= delta < tol:
            break

    # Certify tail: plain prox steps until the fixed-point residual is
    # tiny, so KKT conditions hold tightly at the returned point.
    for _ in range(500):
        b = _polish_bias(X, y, w, b)
        w_new, b_new, step, _ = _backtracked_step(X, y, w, b, lam, step)
        residual = max(float(np.max(np.abs(w_new - w), initial=0.0)), abs(b_new - b))
        new_obj = _objective(X, y, w_new, b_new, lam)
        if new_obj <= obj:
            w, b, obj = w_new, b_new, new_obj
            history.append(obj)
        if residual / step < 1e-7:
            break
    b = _polish_bias(X, y, w, b)
    history.append(_objective(X, y, w, b, lam))

    model = LogisticModel(weights=w, bias=float(b), lam=float(lam), encoder_id=encoder_id)
    if return_history:
        return model, history
    return model


def critical_lambda(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty for which the all-zero weight vector is optimal."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    base = float(np.mean(y))
    g = X.T @ (base - y) / len(y)
    return float(np.max(np.abs(g)))


def default_lambda_grid(X: np.ndarray, y: np.ndarray, size: int = 12) -> np.ndarray:
    """Log-spaced grid spanning 1e-4..1e+1 of the data-scaled critical
    lambda."""
    lam_c = critical_lambda(X, y)
    if lam_c <= 0:
        lam_c = 1.0
    return lam_c * np.logspace(-4, 1, size)


def _stratified_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Deterministic stratified fold assignment: class indices are
    shuffled under the seed and dealt round-robin."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=int)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            assignment[i] = pos % k
    return assignment


def grid_search_cv(
    X: np.ndarray,
    y: np.ndarray,
    grid: np.ndarray,
    k: int = 5,
    seed: int = 0,
    tol: float = 1e-7,
    max_iter: int = 2_000,
) -> CvReport:
    """Stratified k-fold grid search scored by validation AUROC.

    Ties between grid points are broken toward the larger (sparser)
    lambda. Folds whose validation side has a single class are skipped
    with a warning.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    grid = np.asarray(sorted(grid), dtype=float)
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    y = np.asarray(y, dtype=float)
    folds = _stratified_folds(y, k, seed)

    fold_scores = np.full((grid.size, k), np.nan)
    for fold in range(k):
        val = folds == fold
        train = ~val
        if len(np.unique(y[val])) < 2 or len(np.unique(y[train])) < 2:
            warnings.warn(f"fold {fold} has a single class; skipped")
            continue
        for gi, lam in enumerate(grid):
            model = train_l1(X[train], y[train], lam, tol=tol, max_iter=max_iter)
            scores = predict_proba_matrix(model, X[val])
            fold_scores[gi, fold] = auroc(scores, y[val])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean_scores = np.nanmean(fold_scores, axis=1)
    # argmax with ties toward the larger lambda (grid is ascending)
    best = None
    for gi in range(grid.size):
        if np.isnan(mean_scores[gi]):
            continue
        if best is None or mean_scores[gi] >= mean_scores[best]:
            best = gi
    if best is None:
        raise ValueError("every fold was skipped; cannot select lambda")
    return CvReport(
        grid=grid,
        fold_scores=fold_scores,
        mean_scores=mean_scores,
        selected_lambda=float(grid[best]),
    )


def predict_proba(model: LogisticModel, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != model.weights.shape:
        raise ValueError(f"feature dimension {x.shape} != model {model.weights.shape}")
    z = float(model.weights @ x + model.bias)
    return float(_sigmoid(np.array([z]))[0])


def predict_proba_matrix(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[1] != model.weights.shape[0]:
        raise ValueError(f"feature dimension {X.shape[1]} != model {model.weights.shape[0]}")
    return _sigmoid(X @ model.weights + model.bias)


def save_model(model: LogisticModel, path: str | Path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "weights": [float(w) for w in model.weights],
        "bias": model.bias,
        "lambda": model.lam,
        "encoder_id": model.encoder_id,
        "schema_version": model.schema_version,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LogisticModel:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"cannot parse model file {path}: {exc}") from exc
    if raw.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"model format version {raw.get('format_version')} != {MODEL_FORMAT_VERSION}"
        )
    return LogisticModel(
        weights=np.array(raw["weights"], dtype=float),
        bias=float(raw["bias"]),
        lam=float(raw["lambda"]),
        encoder_id=raw.get("encoder_id", ""),
        schema_version=raw.get("schema_version", ""),
    )


@dataclass
class RequestScorer:
    """Frozen encoder + head pair: the reward model used everywhere a
    request needs a success probability."""

    model: LogisticModel
    encode: Callable[[str], np.ndarray]

    def score_text(self, text: str) -> float:
        return predict_proba(self.model, self.encode(text))

    def score(self, title: str, body: str) -> float:
        return self.score_text(combine_title_body(title, body))

    def logit(self, title: str, body: str) -> float:
        x = self.encode(combine_title_body(title, body))
        return float(self.model.weights @ x + self.model.bias)
