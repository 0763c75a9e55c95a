"""Blackbox probabilistic classification and regression oracles.

Both oracle families share the fit-then-predict-table surface the fitted
fixed-point solver needs: classifiers estimate the behavior policy from
(s, a) pairs, regressors estimate conditional means of scalar targets
indexed by (s, a).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ClassifierSpec:
    """Configuration for fit_classifier.

    prob_floor must be positive so the fitted log-policy stays bounded.
    For the logistic kind, `state_features` is an (S, d) matrix (None means
    one-hot states) and `learning_rate=None` picks 0.5 / (1 + L) from a
    curvature estimate.
    """

    kind: str = "tabular-count"
    smoothing_alpha: float = 0.0
    prob_floor: float = 1e-6
    learning_rate: float | None = None
    epochs: int = 500
    l2: float = 0.0
    tol: float = 1e-9
    state_features: np.ndarray | None = None


@dataclass(frozen=True)
class RegressorSpec:
    """Configuration for fit_regressor.

    `fallback` fills unvisited (s, a) cells of the tabular kind; `features`
    is the (S, A, d) table the ridge kind regresses on.
    """

    kind: str = "tabular-mean"
    ridge_lambda: float = 0.0
    fallback: float = 0.0
    features: np.ndarray | None = None


@dataclass
class FittedClassifier:
    """Floored, renormalized policy estimate plus training diagnostics."""

    probs: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def predict(self, s: int) -> np.ndarray:
        return self.probs[s]


@dataclass
class FittedRegressor:
    """Dense prediction table; `weights` is set for the ridge kind."""

    table: np.ndarray
    weights: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def predict(self, s: int, a: int) -> float:
        ns, na = self.table.shape
        if not (0 <= s < ns and 0 <= a < na):
            raise IndexError(f"({s}, {a}) out of range for table {self.table.shape}")
        return float(self.table[s, a])

    def predict_table(self) -> np.ndarray:
        return self.table.copy()


def floor_and_renormalize(probs: np.ndarray, floor: float) -> np.ndarray:
    """Clamp rows at `floor` and renormalize; keeps every entry >= floor / 2."""
    p = np.maximum(np.asarray(probs, dtype=float), floor)
    return p / p.sum(axis=1, keepdims=True)


def _check_fit_inputs(states, actions, n_states, n_actions):
    s = np.asarray(states, dtype=np.int64)
    a = np.asarray(actions, dtype=np.int64)
    if s.size == 0:
        raise ValueError("empty training data")
    if s.shape != a.shape:
        raise ValueError("states and actions must have equal length")
    if s.min() < 0 or s.max() >= n_states or a.min() < 0 or a.max() >= n_actions:
        raise ValueError("state or action index out of range")
    return s, a


def fit_classifier(spec: ClassifierSpec, states, actions,
                   n_states: int, n_actions: int) -> FittedClassifier:
    """Estimate the behavior policy pi(a|s) from observed (s, a) pairs."""
    if not 0.0 < spec.prob_floor < 1.0 / n_actions:
        raise ValueError(f"prob_floor must lie in (0, 1/{n_actions})")
    s, a = _check_fit_inputs(states, actions, n_states, n_actions)
    counts = np.bincount(s * n_actions + a,
                         minlength=n_states * n_actions).reshape(n_states, n_actions)
    state_counts = counts.sum(axis=1)

    if spec.kind == "tabular-count":
        if spec.smoothing_alpha < 0:
            raise ValueError("smoothing_alpha must be nonnegative")
        alpha = spec.smoothing_alpha
        denom = state_counts + alpha * n_actions
        probs = np.full((n_states, n_actions), 1.0 / n_actions)
        seen = denom > 0
        probs[seen] = (counts[seen] + alpha) / denom[seen, None]
        final_loss = _cross_entropy(counts, np.maximum(probs, 1e-300))
    elif spec.kind == "multinomial-logistic":
        probs, final_loss = _fit_logistic(spec, counts, state_counts, n_states, n_actions)
    else:
        raise ValueError(f"unknown classifier kind {spec.kind!r}")

    probs = floor_and_renormalize(probs, spec.prob_floor)
    diagnostics = {
        "kind": spec.kind,
        "final_loss": final_loss,
        "n_unvisited_states": int(np.sum(state_counts == 0)),
        "n_train": int(s.size),
    }
    return FittedClassifier(probs, diagnostics)


def _cross_entropy(counts: np.ndarray, probs: np.ndarray) -> float:
    n = counts.sum()
    return float(-np.sum(counts * np.log(probs)) / n)


def _fit_logistic(spec: ClassifierSpec, counts, state_counts, n_states, n_actions):
    """Full-batch gradient descent on cross-entropy over linear-in-feature logits."""
    phi = spec.state_features
    phi = np.eye(n_states) if phi is None else np.asarray(phi, dtype=float)
    if phi.shape[0] != n_states:
        raise ValueError(f"state_features first axis must be {n_states}")
    n = state_counts.sum()
    state_w = state_counts / n

    weights = np.zeros((phi.shape[1], n_actions))
    lipschitz = float(np.max(np.sum(phi ** 2, axis=1)))
    step = spec.learning_rate if spec.learning_rate is not None else 0.5 / (1.0 + lipschitz)
    trace = []
    for _ in range(spec.epochs):
        logits = phi @ weights
        z = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        loss = _cross_entropy(counts, np.maximum(p, 1e-300))
        loss += 0.5 * spec.l2 * float(np.sum(weights ** 2))
        if not np.isfinite(loss):
            raise RuntimeError(f"logistic training diverged; loss trace: {trace}")
        if trace and abs(trace[-1] - loss) < spec.tol:
            trace.append(loss)
            break
        trace.append(loss)
        grad = phi.T @ (state_w[:, None] * p - counts / n) + spec.l2 * weights
        weights -= step * grad
    logits = phi @ weights
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    return p, trace[-1] if trace else float("nan")


def log_policy(classifier: FittedClassifier) -> np.ndarray:
    """Entrywise log of the fitted policy; flooring keeps it finite."""
    return np.log(classifier.probs)


def fit_regressor(spec: RegressorSpec, states, actions, targets,
                  n_states: int, n_actions: int) -> FittedRegressor:
    """Least-squares estimate of E[y | s, a] over the configured class."""
    s, a = _check_fit_inputs(states, actions, n_states, n_actions)
    y = np.asarray(targets, dtype=float)
    if y.shape != s.shape:
        raise ValueError("targets must align with states/actions")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if not np.isfinite(spec.fallback):
        raise ValueError("fallback must be finite")
    if spec.ridge_lambda < 0:
        raise ValueError("ridge_lambda must be nonnegative")

    cells = s * n_actions + a
    n_cells = n_states * n_actions
    cnt = np.bincount(cells, minlength=n_cells).astype(float)
    sums = np.bincount(cells, weights=y, minlength=n_cells)

    if spec.kind == "tabular-mean":
        flat = np.where(cnt > 0, sums / np.maximum(cnt, 1.0), spec.fallback)
        table = flat.reshape(n_states, n_actions)
        weights = None
    elif spec.kind == "ridge":
        if spec.features is None:
            raise ValueError("ridge regression needs a feature table")
        phi = np.asarray(spec.features, dtype=float)
        if phi.shape[:2] != (n_states, n_actions):
            raise ValueError(f"features shape {phi.shape} does not match ({n_states}, {n_actions}, d)")
        phi_flat = phi.reshape(n_cells, -1)
        d = phi_flat.shape[1]
        gram = (phi_flat * cnt[:, None]).T @ phi_flat + spec.ridge_lambda * np.eye(d)
        try:
            np.linalg.cholesky(gram)
        except np.linalg.LinAlgError:
            raise ValueError(
                "normal equations are rank-deficient; set ridge_lambda > 0"
            ) from None
        weights = np.linalg.solve(gram, phi_flat.T @ sums)
        table = (phi_flat @ weights).reshape(n_states, n_actions)
    else:
        raise ValueError(f"unknown regressor kind {spec.kind!r}")

    residuals = table.reshape(-1)[cells] - y
    diagnostics = {
        "kind": spec.kind,
        "train_rmse": float(np.sqrt(np.mean(residuals ** 2))),
        "n_empty_cells": int(np.sum(cnt == 0)),
        "n_train": int(s.size),
    }
    return FittedRegressor(table, weights, diagnostics)
