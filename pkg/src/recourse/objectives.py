"""The four counterfactual quality objectives.

All four are minimized: distance of the prediction to the desired interval
(validity), distance to the query point (proximity), number of changed
features (sparsity), and weighted distance to the nearest training rows
(plausibility). Everything here is pure and safe to evaluate in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distances import DistanceFunction, gower_matrix
from .errors import ConfigError
from .schema import Dataset, DesiredTarget, Instance
from .predict import PredictionFunction


@dataclass(frozen=True)
class ObjectiveVector:
    o_valid: float
    o_prox: float
    o_sparse: int
    o_plaus: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.o_valid, self.o_prox, float(self.o_sparse), self.o_plaus)


@dataclass(frozen=True)
class PlausibilityConfig:
    """Neighbor count and weights for the plausibility objective.

    ``weights=None`` weights the k nearest rows equally; explicit weights must
    sum to 1.
    """

    k: int = 1
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("plausibility neighbor count k must be >= 1")
        if self.weights is not None:
            if len(self.weights) != self.k:
                raise ConfigError("need exactly k plausibility weights")
            if abs(sum(self.weights) - 1.0) > 1e-12:
                raise ConfigError("plausibility weights must sum to 1 within 1e-12")

    def weight_vector(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.k, 1.0 / self.k)
        return np.asarray(self.weights, dtype=np.float64)


def o_valid(score: float, target: DesiredTarget) -> float:
    """0 inside the desired interval, else the gap to its nearest endpoint."""
    lo, hi = target.interval
    if lo <= score <= hi:
        return 0.0
    return min(abs(score - lo), abs(score - hi))


def o_valid_batch(scores: np.ndarray, target: DesiredTarget) -> np.ndarray:
    lo, hi = target.interval
    scores = np.asarray(scores, dtype=np.float64)
    gap = np.minimum(np.abs(scores - lo), np.abs(scores - hi))
    return np.where((scores >= lo) & (scores <= hi), 0.0, gap)


def gower_distance(a: Instance, b: Instance, data: Dataset) -> float:
    """Scalar Gower distance between two instances in the dataset's space."""
    return float(gower_matrix([a], [b], data)[0, 0])


def o_sparse(a: Instance, b: Instance) -> int:
    """Number of feature positions where the two instances differ."""
    return sum(1 for x, y in zip(a, b) if x != y)


def _nearest_rows(
    dist_row: np.ndarray, k: int
) -> np.ndarray:
    # Stable sort so equal distances resolve to the lowest row index.
    return np.argsort(dist_row, kind="stable")[:k]


def o_plaus(
    x: Instance,
    data: Dataset,
    cfg: PlausibilityConfig = PlausibilityConfig(),
    dist: DistanceFunction = gower_matrix,
) -> float:
    """Weighted distance from *x* to its k nearest training rows."""
    return float(o_plaus_batch([x], data, cfg, dist)[0])


def o_plaus_batch(
    xs: Sequence[Instance],
    data: Dataset,
    cfg: PlausibilityConfig = PlausibilityConfig(),
    dist: DistanceFunction = gower_matrix,
) -> np.ndarray:
    if cfg.k > data.n:
        raise ConfigError(f"plausibility k={cfg.k} exceeds dataset size {data.n}")
    if not xs:
        return np.empty(0)
    d = np.asarray(dist(xs, data.rows, data), dtype=np.float64)
    weights = cfg.weight_vector()
    out = np.empty(len(xs))
    for i in range(len(xs)):
        nearest = _nearest_rows(d[i], cfg.k)
        out[i] = float(weights @ d[i, nearest])
    return out


def evaluate_objectives(
    x: Instance,
    x_interest: Instance,
    f: PredictionFunction,
    target: DesiredTarget,
    data: Dataset,
    cfg: PlausibilityConfig = PlausibilityConfig(),
    dist: DistanceFunction = gower_matrix,
) -> ObjectiveVector:
    """Assemble the full objective vector for one candidate."""
    return evaluate_objectives_batch([x], x_interest, f, target, data, cfg, dist)[0]


def evaluate_objectives_batch(
    xs: Sequence[Instance],
    x_interest: Instance,
    f: PredictionFunction,
    target: DesiredTarget,
    data: Dataset,
    cfg: PlausibilityConfig = PlausibilityConfig(),
    dist: DistanceFunction = gower_matrix,
) -> list[ObjectiveVector]:
    if not xs:
        return []
    scores = f.scalar_scores(xs, target)
    valid = o_valid_batch(scores, target)
    prox = np.asarray(dist(xs, [x_interest], data), dtype=np.float64)[:, 0]
    plaus = o_plaus_batch(xs, data, cfg, dist)
    return [
        ObjectiveVector(float(valid[i]), float(prox[i]), o_sparse(xs[i], x_interest), float(plaus[i]))
        for i in range(len(xs))
    ]
