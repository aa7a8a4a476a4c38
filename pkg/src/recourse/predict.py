"""Uniform batch-prediction abstraction plus small built-in learners.

A :class:`PredictionFunction` maps a batch of instances to one score vector
per instance: per-class probabilities for classification, a single real for
regression. The engine reduces classification output to the score of the
configured class of interest. Built-in learners exist so the package is fully
exercisable without any external model process.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, PredictorError
from .schema import Dataset, DesiredTarget, FeatureSchema, Instance, format_value

CLASSIFICATION = "classification"
REGRESSION = "regression"


class PredictionFunction:
    """Deterministic batch scorer with task metadata.

    Args:
        fn: callable mapping a list of instances to an (n, n_outputs) array.
        task: ``"classification"`` or ``"regression"``.
        class_labels: ordered label names (classification only); score column
            i belongs to ``class_labels[i]``.
        name: short identifier used in manifests and provenance.
    """

    def __init__(
        self,
        fn: Callable[[Sequence[Instance]], np.ndarray],
        task: str,
        class_labels: Sequence[str] | None = None,
        name: str = "custom",
    ):
        if task not in (CLASSIFICATION, REGRESSION):
            raise ConfigError(f"unknown task {task!r}")
        if task == CLASSIFICATION and not class_labels:
            raise ConfigError("classification predictor needs class labels")
        self._fn = fn
        self.task = task
        self.class_labels = tuple(class_labels) if class_labels else None
        self.name = name

    def predict_batch(self, batch: Sequence[Instance]) -> np.ndarray:
        """Score a batch; output row i corresponds to batch element i."""
        if len(batch) == 0:
            width = len(self.class_labels) if self.class_labels else 1
            return np.empty((0, width))
        out = np.asarray(self._fn(list(batch)), dtype=np.float64)
        if out.ndim == 1:
            out = out[:, None]
        if out.shape[0] != len(batch):
            raise PredictorError(
                f"predictor returned {out.shape[0]} rows for a batch of {len(batch)}"
            )
        if self.class_labels and out.shape[1] != len(self.class_labels):
            raise PredictorError(
                f"predictor returned {out.shape[1]} columns, expected {len(self.class_labels)}"
            )
        if not np.isfinite(out).all():
            raise PredictorError("predictor returned non-finite scores")
        return out

    def scalar_scores(self, batch: Sequence[Instance], target: DesiredTarget) -> np.ndarray:
        """Project batch output to the single score the engine optimizes."""
        scores = self.predict_batch(batch)
        if self.task == REGRESSION:
            return scores[:, 0]
        return scores[:, self.class_index(target)]

    def class_index(self, target: DesiredTarget) -> int:
        if self.class_labels is None:
            raise PredictorError("regression predictor has no classes")
        if target.class_of_interest is None:
            raise ConfigError("classification target needs a class of interest")
        try:
            return self.class_labels.index(target.class_of_interest)
        except ValueError:
            raise ConfigError(
                f"class {target.class_of_interest!r} not among predictor classes {self.class_labels}"
            ) from None

    def hard_label(self, score_vector: np.ndarray) -> str:
        """Argmax class label; ties resolve to the first label."""
        if self.class_labels is None:
            raise PredictorError("hard labels are only defined for classification")
        return self.class_labels[int(np.argmax(score_vector))]


def instance_key(inst: Instance) -> str:
    """Canonical text key: shortest round-trip decimals, unit-separator joined."""
    return "\x1f".join(format_value(v) for v in inst)


class PredictionCache(PredictionFunction):
    """Memoizing wrapper; returns exactly what the wrapped function would.

    Keys are canonical text renderings of the instance values, so numerically
    identical instances hit the cache regardless of how they were produced.
    Thread-safe.
    """

    def __init__(self, inner: PredictionFunction):
        super().__init__(inner._fn, inner.task, inner.class_labels, inner.name)
        self._inner = inner
        self._store: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def predict_batch(self, batch: Sequence[Instance]) -> np.ndarray:
        keys = [instance_key(inst) for inst in batch]
        with self._lock:
            missing: dict[str, int] = {}
            order: list[Instance] = []
            for key, inst in zip(keys, batch):
                if key not in self._store and key not in missing:
                    missing[key] = len(order)
                    order.append(inst)
        if order:
            fresh = self._inner.predict_batch(order)
        with self._lock:
            if order:
                for key, idx in missing.items():
                    self._store[key] = fresh[idx]
            self.misses += len(order)
            self.hits += len(batch) - len(order)
            if not batch:
                width = len(self.class_labels) if self.class_labels else 1
                return np.empty((0, width))
            return np.stack([self._store[key] for key in keys])


# ---------------------------------------------------------------------------
# Built-in learners


def threshold_model(
    schema: FeatureSchema,
    feature: str,
    cut: float,
    labels: tuple[str, str] = ("neg", "pos"),
) -> PredictionFunction:
    """Hard step classifier: positive class iff the named feature exceeds *cut*."""
    j = schema.index_of(feature)

    def fn(batch: Sequence[Instance]) -> np.ndarray:
        pos = np.array([1.0 if float(inst[j]) > cut else 0.0 for inst in batch])
        return np.column_stack([1.0 - pos, pos])

    return PredictionFunction(fn, CLASSIFICATION, labels, name=f"threshold:{feature}>{cut}")


def fit_knn(data: Dataset, k: int) -> PredictionFunction:
    """Gower-distance k-nearest-neighbor model over the dataset's rows.

    Classification scores are class frequencies among the k nearest rows;
    regression returns their mean outcome. Distance ties at the neighborhood
    boundary resolve to the lowest row index.
    """
    from .distances import gower_matrix_fast

    if k <= 0:
        raise ConfigError("k must be positive")
    if k > data.n:
        raise ConfigError(f"k={k} exceeds dataset size {data.n}")
    if data.outcomes is None:
        raise ConfigError("k-nearest-neighbor model needs an outcome column")

    classification = isinstance(data.outcomes[0], str)
    if classification:
        labels = tuple(sorted(set(data.outcomes)))
        codes = np.array([labels.index(y) for y in data.outcomes])
    else:
        values = np.asarray(data.outcomes, dtype=np.float64)

    def neighbor_sets(batch: Sequence[Instance]) -> list[np.ndarray]:
        d = gower_matrix_fast(batch, data.rows, data)
        sets = []
        for row in d:
            if k == data.n:
                sets.append(np.arange(data.n))
                continue
            part = np.argpartition(row, k - 1)[:k]
            kth = row[part].max()
            closer = np.flatnonzero(row < kth)
            tied = np.flatnonzero(row == kth)
            sets.append(np.concatenate([closer, tied[: k - len(closer)]]))
        return sets

    if classification:

        def fn(batch: Sequence[Instance]) -> np.ndarray:
            out = np.empty((len(batch), len(labels)))
            for i, nb in enumerate(neighbor_sets(batch)):
                out[i] = np.bincount(codes[nb], minlength=len(labels)) / k
            return out

        return PredictionFunction(fn, CLASSIFICATION, labels, name=f"knn:k={k}")

    def fn(batch: Sequence[Instance]) -> np.ndarray:
        out = np.empty((len(batch), 1))
        for i, nb in enumerate(neighbor_sets(batch)):
            out[i, 0] = values[nb].mean()
        return out

    return PredictionFunction(fn, REGRESSION, name=f"knn:k={k}")


def fit_logistic(
    data: Dataset, epochs: int = 500, learning_rate: float = 0.1
) -> PredictionFunction:
    """Full-batch gradient-descent logistic regression for binary outcomes.

    Numeric features are standardized internally; categorical features are
    one-hot encoded. With zero epochs all coefficients stay zero and every
    score is 0.5.
    """
    if data.outcomes is None:
        raise ConfigError("logistic model needs an outcome column")
    labels = tuple(sorted(set(data.outcomes)))
    if len(labels) != 2 or not all(isinstance(y, str) for y in data.outcomes):
        raise ConfigError("logistic model needs a binary categorical outcome")

    schema = data.schema
    num_idx = schema.numeric_indices
    cat_idx = schema.categorical_indices

    train_num = data.encoded()[0]
    means = train_num.mean(axis=0) if num_idx else np.empty(0)
    sds = train_num.std(axis=0) if num_idx else np.empty(0)
    safe_sds = np.where(sds > 0, sds, 1.0)

    def design(batch: Sequence[Instance]) -> np.ndarray:
        cols: list[np.ndarray] = []
        if num_idx:
            num = np.array([[float(inst[j]) for j in num_idx] for inst in batch])
            cols.append((num - means) / safe_sds)
        for j in cat_idx:
            levels = schema.features[j].levels
            onehot = np.zeros((len(batch), len(levels)))
            for r, inst in enumerate(batch):
                onehot[r, levels.index(inst[j])] = 1.0
            cols.append(onehot)
        return np.hstack(cols) if cols else np.zeros((len(batch), 0))

    x = design(data.rows)
    y = np.array([1.0 if lab == labels[1] else 0.0 for lab in data.outcomes])
    w = np.zeros(x.shape[1])
    b = 0.0
    n = len(y)
    for _ in range(epochs):
        z = x @ w + b
        p = 1.0 / (1.0 + np.exp(-z))
        grad = p - y
        w -= learning_rate * (x.T @ grad) / n
        b -= learning_rate * grad.mean()

    def fn(batch: Sequence[Instance]) -> np.ndarray:
        z = design(batch) @ w + b
        p = 1.0 / (1.0 + np.exp(-z))
        return np.column_stack([1.0 - p, p])

    return PredictionFunction(fn, CLASSIFICATION, labels, name=f"logistic:epochs={epochs}")
