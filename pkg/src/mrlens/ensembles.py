"""Tree-ensemble regressors for completion-time prediction.

Three kinds share one bagging loop: bagged trees split on the best threshold
of a feature subsample, extra-random trees on uniformly random thresholds,
and the boosted kind fits squared-loss residuals stagewise. The base learner
is a single regression tree; everything around it (bagging, staging, metric
and importance computation) lives here so behavior is pinned by this module,
not by library defaults.
"""

from __future__ import annotations

import math
import pickle
from dataclasses import dataclass, field

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from .errors import DomainError

ENSEMBLE_KINDS = ("bagged_random_trees", "extra_random_trees", "gradient_boosted_trees")

ARTIFACT_VERSION = "mrlens-model-1"


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    n_trees: int = 100
    max_depth: int | None = None  # defaults: 12 bagged/extra, 6 boosted
    min_leaf: int = 5
    learning_rate: float = 0.1
    feature_subsample: float | None = None  # default sqrt(p)/p for bagged/extra
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ENSEMBLE_KINDS:
            raise DomainError(f"unknown ensemble kind {self.kind!r}")
        if self.n_trees < 1:
            raise DomainError("n_trees must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise DomainError("learning_rate must lie in (0, 1]")

    @property
    def effective_depth(self) -> int:
        if self.max_depth is not None:
            return self.max_depth
        return 6 if self.kind == "gradient_boosted_trees" else 12


@dataclass(frozen=True)
class EvalMetrics:
    mse: float
    mae: float
    sa: float


@dataclass
class Model:
    spec: EnsembleSpec
    n_features: int
    trees: list[DecisionTreeRegressor] = field(default_factory=list)
    base: float = 0.0
    train_loss_per_stage: list[float] = field(default_factory=list)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DomainError(
                f"prediction input has {X.shape} but model expects "
                f"{self.n_features} feature columns"
            )
        if self.spec.kind == "gradient_boosted_trees":
            out = np.full(len(X), self.base)
            for tree in self.trees:
                out += self.spec.learning_rate * tree.predict(X)
            return out
        out = np.zeros(len(X))
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)


def _tree_seeds(seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1)[0]) for s in ss.spawn(n)]


def train(spec: EnsembleSpec, X: np.ndarray, y: np.ndarray) -> Model:
    """Fit an ensemble; (spec, data, seed) fixes the result bit-for-bit."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise DomainError("training matrix must have at least one feature column")
    if len(X) < 10:
        raise DomainError(f"training requires >= 10 rows, got {len(X)}")
    if len(X) != len(y):
        raise DomainError("X and y row counts differ")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise DomainError("training data contains non-finite cells")

    n, p = X.shape
    seeds = _tree_seeds(spec.seed, spec.n_trees)
    model = Model(spec=spec, n_features=p)

    if spec.kind == "gradient_boosted_trees":
        model.base = float(y.mean())
        current = np.full(n, model.base)
        for i in range(spec.n_trees):
            residual = y - current
            tree = DecisionTreeRegressor(
                max_depth=spec.effective_depth,
                min_samples_leaf=spec.min_leaf,
                splitter="best",
                random_state=seeds[i],
            )
            tree.fit(X, residual)
            current = current + spec.learning_rate * tree.predict(X)
            model.trees.append(tree)
            model.train_loss_per_stage.append(float(np.mean((y - current) ** 2)))
        return model

    subsample = spec.feature_subsample
    if subsample is None:
        subsample = math.sqrt(p) / p
    max_features = max(1, int(round(subsample * p)))
    splitter = "random" if spec.kind == "extra_random_trees" else "best"
    rng = np.random.default_rng(spec.seed)
    for i in range(spec.n_trees):
        idx = rng.integers(0, n, size=n)
        tree = DecisionTreeRegressor(
            max_depth=spec.effective_depth,
            min_samples_leaf=spec.min_leaf,
            max_features=max_features,
            splitter=splitter,
            random_state=seeds[i],
        )
        tree.fit(X[idx], y[idx])
        model.trees.append(tree)
    return model


def eval_metrics(
    y_true: np.ndarray,
    y_pred: np.ndarray,
    y_train_pool: np.ndarray,
    seed: int = 0,
    n_rounds: int = 1000,
) -> EvalMetrics:
    """MSE, MAE, and standardized accuracy.

    SA = 1 - MAE / MAE_guess, where MAE_guess is the mean absolute error of
    predicting each test point with a uniformly drawn training target,
    averaged over `n_rounds` seeded draws.
    """
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    pool = np.asarray(y_train_pool, dtype=float)
    if len(y_true) == 0 or len(y_true) != len(y_pred):
        raise DomainError("eval_metrics requires non-empty, equal-length vectors")
    if len(pool) == 0:
        raise DomainError("eval_metrics requires a non-empty training pool")
    err = y_pred - y_true
    mse = float(np.mean(err**2))
    mae = float(np.mean(np.abs(err)))
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, len(pool), size=(n_rounds, len(y_true)))
    mae_guess = float(np.mean(np.abs(pool[draws] - y_true[None, :])))
    sa = 0.0 if mae_guess == 0 else 1.0 - mae / mae_guess
    return EvalMetrics(mse=mse, mae=mae, sa=sa)


def permutation_importance(
    model: Model,
    X_val: np.ndarray,
    y_val: np.ndarray,
    seed: int,
    n_repeats: int = 5,
) -> np.ndarray:
    """Mean MSE increase when one column is shuffled, floored at zero and
    normalized to sum to one (when any signal exists)."""
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float)
    if len(X_val) < 10:
        raise DomainError("permutation importance requires >= 10 validation rows")
    baseline = float(np.mean((model.predict(X_val) - y_val) ** 2))
    rng = np.random.default_rng(seed)
    p = X_val.shape[1]
    raw = np.zeros(p)
    for j in range(p):
        deltas = []
        for _ in range(n_repeats):
            perm = rng.permutation(len(X_val))
            shuffled = X_val.copy()
            shuffled[:, j] = X_val[perm, j]
            mse = float(np.mean((model.predict(shuffled) - y_val) ** 2))
            deltas.append(mse - baseline)
        raw[j] = max(0.0, float(np.mean(deltas)))
    total = raw.sum()
    return raw / total if total > 0 else raw


def impurity_importance(model: Model) -> np.ndarray:
    """Average of per-tree impurity importances; the config-switchable
    alternative to permutation importance."""
    acc = np.zeros(model.n_features)
    for tree in model.trees:
        acc += tree.feature_importances_
    total = acc.sum()
    return acc / total if total > 0 else acc


def save_model(model: Model, path) -> None:
    with open(path, "wb") as fh:
        pickle.dump({"version": ARTIFACT_VERSION, "model": model}, fh)


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        doc = pickle.load(fh)
    if doc.get("version") != ARTIFACT_VERSION:
        raise DomainError(
            f"model artifact version {doc.get('version')!r} "
            f"does not match {ARTIFACT_VERSION}"
        )
    return doc["model"]
