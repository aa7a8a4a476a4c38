"""Independent brute-force reference implementations used as test oracles.

Everything here is deliberately written with plain loops and direct formula
transcriptions, sharing no code path with the package implementations it
checks.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def gower_scalar(a, b, kinds, ranges) -> float:
    """Plain-loop mixed distance: |diff|/range for numerics, mismatch for levels.

    ``kinds`` is a sequence of "numeric"/"categorical"; ``ranges`` aligns with
    the features (ignored for categoricals). A zero range scores 0 for equal
    values and 1 otherwise.
    """
    total = 0.0
    for j, kind in enumerate(kinds):
        if kind == "categorical":
            total += 0.0 if a[j] == b[j] else 1.0
        else:
            r = ranges[j]
            if r and r > 0:
                total += abs(float(a[j]) - float(b[j])) / r
            else:
                total += 0.0 if a[j] == b[j] else 1.0
    return total / len(kinds)


def l0_pairs(xs, ys) -> list[list[float]]:
    out = []
    for a in xs:
        row = []
        for b in ys:
            row.append(float(sum(1 for u, v in zip(a, b) if u != v)))
        out.append(row)
    return out


def o_valid_direct(score: float, lo: float, hi: float) -> float:
    if lo <= score <= hi:
        return 0.0
    return min(abs(score - lo), abs(score - hi))


def o_plaus_direct(x, rows, kinds, ranges, k: int, weights=None) -> float:
    """Weighted distance to the k nearest rows; ties by ascending row index."""
    dists = [gower_scalar(x, row, kinds, ranges) for row in rows]
    order = sorted(range(len(rows)), key=lambda i: (dists[i], i))[:k]
    if weights is None:
        weights = [1.0 / k] * k
    return sum(w * dists[i] for w, i in zip(weights, order))


def dominates_direct(a, b) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def constrained_dominates_direct(a, av, b, bv) -> bool:
    if av <= 0 and bv <= 0:
        return dominates_direct(a, b)
    if (av <= 0) != (bv <= 0):
        return av <= 0
    return av < bv


def brute_fronts(objectives, violations=None) -> list[list[int]]:
    """Front partition by repeated full scans with the direct comparator."""
    n = len(objectives)
    remaining = set(range(n))
    fronts = []
    while remaining:
        front = []
        for i in remaining:
            dominated = False
            for j in remaining:
                if i == j:
                    continue
                if violations is None:
                    if dominates_direct(objectives[j], objectives[i]):
                        dominated = True
                        break
                else:
                    if constrained_dominates_direct(
                        objectives[j], violations[j], objectives[i], violations[i]
                    ):
                        dominated = True
                        break
            if not dominated:
                front.append(i)
        fronts.append(sorted(front))
        remaining -= set(front)
    return fronts


def nondominated_direct(objectives) -> list[int]:
    return brute_fronts(objectives)[0]


def hv_inclusion_exclusion(points, ref) -> float:
    """Exact union volume of the boxes [point, ref] by inclusion-exclusion.

    Exponential in the number of points; only for small constructed cases.
    """
    pts = [p for p in points if all(v <= r for v, r in zip(p, ref))]
    total = 0.0
    for size in range(1, len(pts) + 1):
        for subset in itertools.combinations(pts, size):
            corner = [max(p[d] for p in subset) for d in range(len(ref))]
            vol = 1.0
            for d in range(len(ref)):
                vol *= max(ref[d] - corner[d], 0.0)
            total += vol if size % 2 == 1 else -vol
    return total


def hv_monte_carlo(points, ref, n_samples: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo hypervolume estimate and its standard error."""
    pts = [p for p in points if all(v <= r for v, r in zip(p, ref))]
    if not pts:
        return 0.0, 0.0
    arr = np.asarray(pts, dtype=np.float64)
    lower = arr.min(axis=0)
    upper = np.asarray(ref, dtype=np.float64)
    box = float(np.prod(upper - lower))
    if box <= 0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    samples = rng.uniform(lower, upper, size=(n_samples, len(ref)))
    covered = np.zeros(n_samples, dtype=bool)
    for p in arr:
        covered |= (samples >= p).all(axis=1)
    frac = float(covered.mean())
    se = box * math.sqrt(max(frac * (1.0 - frac), 1e-300) / n_samples)
    return box * frac, se


def whatif_selection_direct(rows, scores, lo, hi, x_interest, dist_fn, l) -> list[int]:
    """Full-sort selection of the l nearest rows with scores inside [lo, hi]."""
    eligible = [
        i
        for i in range(len(rows))
        if lo <= scores[i] <= hi and tuple(rows[i]) != tuple(x_interest)
    ]
    ordered = sorted(eligible, key=lambda i: (dist_fn(rows[i]), i))
    return ordered[:l]
