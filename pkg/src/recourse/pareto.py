"""Domination machinery for minimization problems.

Provides plain and feasibility-first (violation-penalizing) domination,
fast nondominated sorting, a crowding score that mixes objective-space and
feature-space diversity, and exact hypervolume for up to four objectives with
a seeded Monte-Carlo fallback above that.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .distances import DistanceFunction
from .errors import ConfigError
from .schema import Dataset, Instance

FrontPartition = list[list[int]]

MC_FALLBACK_SAMPLES = 100_000
MC_FALLBACK_SEED = 0


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff *a* is no worse everywhere and strictly better somewhere."""
    if len(a) != len(b):
        raise ConfigError(f"objective arity mismatch: {len(a)} vs {len(b)}")
    not_worse = all(x <= y for x, y in zip(a, b))
    return not_worse and any(x < y for x, y in zip(a, b))


def constrained_dominates(
    a: Sequence[float], a_violation: float, b: Sequence[float], b_violation: float
) -> bool:
    """Feasibility-first comparison: feasible beats infeasible, smaller
    violation beats larger, and two feasible candidates fall back to plain
    domination."""
    a_feasible = a_violation <= 0.0
    b_feasible = b_violation <= 0.0
    if a_feasible and b_feasible:
        return dominates(a, b)
    if a_feasible != b_feasible:
        return a_feasible
    return a_violation < b_violation


def domination_matrix(
    objectives: Sequence[Sequence[float]], violations: Sequence[float] | None = None
) -> np.ndarray:
    """Boolean matrix D with D[i, j] true iff candidate i dominates j."""
    obj = np.asarray(objectives, dtype=np.float64)
    le = (obj[:, None, :] <= obj[None, :, :]).all(axis=2)
    lt = (obj[:, None, :] < obj[None, :, :]).any(axis=2)
    plain = le & lt
    if violations is None:
        return plain
    v = np.asarray(violations, dtype=np.float64)
    feas = v <= 0.0
    both_feasible = feas[:, None] & feas[None, :]
    feasible_vs_infeasible = feas[:, None] & ~feas[None, :]
    both_infeasible = ~feas[:, None] & ~feas[None, :]
    return (
        (both_feasible & plain)
        | feasible_vs_infeasible
        | (both_infeasible & (v[:, None] < v[None, :]))
    )


def nondominated_sort(
    objectives: Sequence[Sequence[float]], violations: Sequence[float] | None = None
) -> FrontPartition:
    """Partition candidate indices into fronts F1, F2, ... by repeated peeling."""
    n = len(objectives)
    if n == 0:
        raise ConfigError("cannot sort an empty population")
    dom = domination_matrix(objectives, violations)
    remaining = np.ones(n, dtype=bool)
    fronts: FrontPartition = []
    while remaining.any():
        dominated = (dom & remaining[:, None]).any(axis=0)
        current = remaining & ~dominated
        if not current.any():  # defensive: cycles are impossible for a strict order
            current = remaining.copy()
        fronts.append([int(i) for i in np.flatnonzero(current)])
        remaining &= ~current
    return fronts


def nondominated_indices(
    objectives: Sequence[Sequence[float]], violations: Sequence[float] | None = None
) -> list[int]:
    """Indices of candidates dominated by nobody."""
    if len(objectives) == 0:
        return []
    dom = domination_matrix(objectives, violations)
    return [int(i) for i in np.flatnonzero(~dom.any(axis=0))]


def _objective_space_crowding(obj: np.ndarray) -> np.ndarray:
    """Standard sorted-neighbor-gap crowding, made duplicate-consistent.

    Scores are computed per unique objective vector and broadcast back, so
    exact duplicates always share one score. Extreme vectors get +inf.
    """
    m = obj.shape[0]
    uniq, inverse = np.unique(obj, axis=0, return_inverse=True)
    u = uniq.shape[0]
    if u <= 2:
        return np.full(m, np.inf)
    scores = np.zeros(u)
    for col in range(uniq.shape[1]):
        order = np.argsort(uniq[:, col], kind="stable")
        lo, hi = uniq[order[0], col], uniq[order[-1], col]
        scores[order[0]] = np.inf
        scores[order[-1]] = np.inf
        span = hi - lo
        if span <= 0:
            continue  # a flat objective contributes no gap
        for pos in range(1, u - 1):
            i = order[pos]
            if np.isinf(scores[i]):
                continue
            scores[i] += (uniq[order[pos + 1], col] - uniq[order[pos - 1], col]) / span
    return scores[inverse]


def _feature_space_crowding(
    instances: Sequence[Instance], data: Dataset, dist: DistanceFunction
) -> np.ndarray:
    """Mean distance to the two nearest front members, scaled to [0, 1]."""
    m = len(instances)
    if m <= 2:
        return np.full(m, np.inf)
    d = np.asarray(dist(instances, instances, data), dtype=np.float64)
    np.fill_diagonal(d, np.inf)
    part = np.sort(d, axis=1)[:, :2]
    crowd = part.mean(axis=1)
    top = crowd.max()
    if np.isfinite(top) and top > 0:
        crowd = crowd / top
    return crowd


def crowding_distance(
    objectives: Sequence[Sequence[float]],
    instances: Sequence[Instance] | None = None,
    data: Dataset | None = None,
    dist: DistanceFunction | None = None,
) -> np.ndarray:
    """Combined diversity score for one front.

    Objective-space crowding plus, when instances are given, an equally
    weighted feature-space term; fronts of at most two members are all +inf.
    """
    obj = np.asarray(objectives, dtype=np.float64)
    if obj.shape[0] <= 2:
        return np.full(obj.shape[0], np.inf)
    combined = _objective_space_crowding(obj)
    if instances is not None and data is not None and dist is not None:
        combined = combined + _feature_space_crowding(instances, data, dist)
    return combined


def crowding_order(scores: np.ndarray) -> list[int]:
    """Indices sorted by descending crowding score, ties by position."""
    idx = np.lexsort((np.arange(len(scores)), -scores))
    return [int(i) for i in idx]


# ---------------------------------------------------------------------------
# Hypervolume


def _filter_nondominated(points: list[tuple[float, ...]]) -> list[tuple[float, ...]]:
    kept: list[tuple[float, ...]] = []
    for p in points:
        if any(all(q[i] <= p[i] for i in range(len(p))) and q != p for q in points):
            continue
        if p not in kept:
            kept.append(p)
    return kept


def _hv_exact(points: list[tuple[float, ...]], ref: tuple[float, ...]) -> float:
    points = _filter_nondominated(points)
    d = len(ref)
    if not points:
        return 0.0
    if d == 1:
        return ref[0] - min(p[0] for p in points)
    if d == 2:
        pts = sorted(points)
        total = 0.0
        best_y = np.inf
        for i, (x, y) in enumerate(pts):
            right = pts[i + 1][0] if i + 1 < len(pts) else ref[0]
            best_y = min(best_y, y)
            if right > x:
                total += (right - x) * (ref[1] - best_y)
        return total
    # Dimension sweep: slice along the last objective and recurse on the rest.
    pts = sorted(points, key=lambda p: p[-1])
    total = 0.0
    for i, p in enumerate(pts):
        upper = pts[i + 1][-1] if i + 1 < len(pts) else ref[-1]
        depth = upper - p[-1]
        if depth > 0:
            cross = _hv_exact([q[:-1] for q in pts[: i + 1]], ref[:-1])
            total += depth * cross
    return total


def _hv_monte_carlo(
    points: list[tuple[float, ...]],
    ref: tuple[float, ...],
    n_samples: int = MC_FALLBACK_SAMPLES,
    seed: int = MC_FALLBACK_SEED,
) -> float:
    arr = np.asarray(points, dtype=np.float64)
    lower = arr.min(axis=0)
    upper = np.asarray(ref, dtype=np.float64)
    box = float(np.prod(upper - lower))
    if box <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    samples = rng.uniform(lower, upper, size=(n_samples, len(ref)))
    covered = np.zeros(n_samples, dtype=bool)
    for p in arr:
        covered |= (samples >= p).all(axis=1)
    return box * float(covered.mean())


def hypervolume(points: Sequence[Sequence[float]], ref: Sequence[float]) -> float:
    """Lebesgue measure of the space between *points* and the reference point.

    Points that do not weakly dominate the reference contribute nothing.
    Exact dimension-sweep up to four objectives; seeded Monte-Carlo beyond.
    """
    ref_t = tuple(float(r) for r in ref)
    pts: list[tuple[float, ...]] = []
    for p in points:
        if len(p) != len(ref_t):
            raise ConfigError(f"point arity {len(p)} does not match reference {len(ref_t)}")
        q = tuple(float(v) for v in p)
        if all(v <= r for v, r in zip(q, ref_t)):
            pts.append(q)
    if not pts:
        return 0.0
    if len(ref_t) <= 4:
        return _hv_exact(pts, ref_t)
    return _hv_monte_carlo(pts, ref_t)
