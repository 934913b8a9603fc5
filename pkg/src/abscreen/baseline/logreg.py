"""L2-regularized logistic regression, trained by deterministic full-batch
gradient descent with backtracking line search.

The objective is mean logistic loss plus (lam / 2) * ||w||^2; the bias is
not regularized. Full-batch descent from a zero start makes every fit
bit-reproducible, which matters for the cross-validated baseline numbers.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from ..corpus import ScreeningDecision
from ..errors import FitError
from ._validation import (
    ParamsMixin,
    as_binary_labels,
    check_consistent_length,
    check_is_fitted,
    require_both_classes,
)
from .tfidf import SparseVector, vectors_to_matrix

_ARMIJO_C = 1e-4
_MIN_STEP = 1e-12


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                      lam: float) -> tuple[float, np.ndarray, float]:
    """Regularized mean logistic loss with its analytic gradient.

    Returns (loss, grad_w, grad_b). Exposed separately so the gradient can
    be checked against finite differences.
    """
    z = X @ w + b
    # log(1 + exp(z)) - y*z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * lam * float(w @ w)
    residual = _sigmoid(z) - y
    grad_w = X.T @ residual / len(y) + lam * w
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


def _as_matrix(X, n_features: int | None) -> np.ndarray:
    if isinstance(X, np.ndarray):
        return np.asarray(X, dtype=float)
    vectors = list(X)
    if n_features is None:
        n_features = max((max(v.indices) + 1 for v in vectors if v.indices), default=0)
    return vectors_to_matrix(vectors, n_features)


class LogisticRegression(ParamsMixin):
    """Binary classifier over tf-idf vectors; Include is the positive class.

    Parameters
    ----------
    lam : L2 strength on the weights (bias exempt).
    max_iters, tol : descent stops when the gradient infinity-norm falls
        below ``tol`` or after ``max_iters`` accepted steps.
    seed : accepted for interface parity; the zero-initialized full-batch
        solver uses no randomness.
    """

    def __init__(self, lam: float = 1.0, max_iters: int = 500, tol: float = 1e-6,
                 seed: int = 0):
        self.lam = lam
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed

    def fit(self, X: Sequence[SparseVector] | np.ndarray, y: Sequence,
            n_features: int | None = None) -> "LogisticRegression":
        check_consistent_length(X, y)
        y01 = as_binary_labels(y)
        require_both_classes(y01)
        Xd = _as_matrix(X, n_features)
        w = np.zeros(Xd.shape[1])
        b = 0.0
        loss, grad_w, grad_b = loss_and_gradient(w, b, Xd, y01, self.lam)
        self.n_iter_ = 0
        self.converged_ = False
        for _ in range(self.max_iters):
            g_inf = max(float(np.max(np.abs(grad_w))) if grad_w.size else 0.0,
                        abs(grad_b))
            if g_inf < self.tol:
                self.converged_ = True
                break
            g_sq = float(grad_w @ grad_w) + grad_b * grad_b
            step = 1.0
            while step >= _MIN_STEP:
                w_new = w - step * grad_w
                b_new = b - step * grad_b
                loss_new, gw_new, gb_new = loss_and_gradient(w_new, b_new, Xd, y01, self.lam)
                if loss_new <= loss - _ARMIJO_C * step * g_sq:
                    break
                step *= 0.5
            if step < _MIN_STEP:
                break  # no descent step improves the loss; accept current point
            w, b, loss, grad_w, grad_b = w_new, b_new, loss_new, gw_new, gb_new
            self.n_iter_ += 1
        self.coef_ = w
        self.intercept_ = b
        self.loss_ = loss
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        Xd = _as_matrix(X, len(self.coef_))
        return Xd @ self.coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        """1 for Include, 0 for Exclude; probability 0.5 maps to Include."""
        return (self.predict_proba(X) >= 0.5).astype(int)

    def predict_one(self, x: SparseVector) -> tuple[ScreeningDecision, float]:
        prob = float(self.predict_proba([x])[0])
        label = ScreeningDecision.INCLUDE if prob >= 0.5 else ScreeningDecision.EXCLUDE
        return label, prob


def train_logreg(X: Sequence[SparseVector], y: Sequence, lam: float = 1.0,
                 max_iters: int = 500, tol: float = 1e-6, seed: int = 0,
                 n_features: int | None = None) -> LogisticRegression:
    return LogisticRegression(lam=lam, max_iters=max_iters, tol=tol, seed=seed).fit(
        X, y, n_features=n_features)


def save_model(model: LogisticRegression, path: str | Path) -> None:
    """Plain-text dump: V / lambda / bias header, then nonzero index:weight
    lines with full float precision (exact reload)."""
    check_is_fitted(model, "coef_")
    lines = [
        "# abscreen-logreg v1",
        f"V={len(model.coef_)}",
        f"lambda={model.lam!r}",
        f"bias={model.intercept_!r}",
    ]
    for idx in np.flatnonzero(model.coef_):
        lines.append(f"{int(idx)}:{model.coef_[idx]!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LogisticRegression:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    header: dict[str, str] = {}
    weights: list[tuple[int, float]] = []
    for line in text:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, value = line.split("=", 1)
            header[key] = value
        elif ":" in line:
            idx, value = line.split(":", 1)
            weights.append((int(idx), float(value)))
        else:
            raise FitError(f"malformed model line: {line!r}")
    try:
        n_features = int(header["V"])
        lam = float(header["lambda"])
        bias = float(header["bias"])
    except KeyError as exc:
        raise FitError(f"model file missing header field {exc}") from exc
    model = LogisticRegression(lam=lam)
    coef = np.zeros(n_features)
    for idx, value in weights:
        coef[idx] = value
    model.coef_ = coef
    model.intercept_ = bias
    return model
