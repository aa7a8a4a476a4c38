"""Iterative nearest-instance feature substitution.

Anchors the search at the closest eligible training row, then walks from
the query point toward that anchor one feature substitution at a time,
always advancing to the candidate with the highest reward. Every created
candidate is archived; with early finishing disabled the walk recreates the
anchor and the archive holds exactly d*(d+1)/2 candidates, where d is the
number of features in which anchor and query point differ.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .distances import get_distance
from .errors import ConfigError, SearchError
from .objectives import PlausibilityConfig, o_plaus, o_valid
from .predict import CLASSIFICATION, PredictionCache, PredictionFunction
from .results import CounterfactualSet
from .schema import Dataset, DesiredTarget, Instance

REWARDS = ("sparsity", "proximity", "plausibility")
DENOMINATOR_FLOOR = 1e-12


@dataclass
class NiceConfig:
    optimization: str = "sparsity"
    x_nn_correct: bool = True
    margin_correct: float | None = None
    return_multiple: bool = False
    finish_early: bool = True
    distance_function: str = "gower"

    def __post_init__(self):
        if self.optimization not in REWARDS:
            raise ConfigError(f"unknown reward {self.optimization!r}; known: {REWARDS}")
        if self.margin_correct is not None and self.margin_correct < 0:
            raise ConfigError("margin_correct must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "NiceConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown NICE config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def default_margin_correct(f: PredictionFunction, target: DesiredTarget, data: Dataset) -> float:
    """Half the median absolute gap between true and predicted outcomes."""
    if data.outcomes is None:
        raise SearchError("regression correctness filter needs true outcomes")
    predicted = f.scalar_scores(data.rows, target)
    truth = np.asarray(data.outcomes, dtype=np.float64)
    return float(np.median(np.abs(predicted - truth))) / 2.0


def find_x_nn(
    x_interest: Instance,
    data: Dataset,
    f: PredictionFunction,
    target: DesiredTarget,
    cfg: NiceConfig | None = None,
) -> Instance:
    """Closest eligible training row to the query point.

    Eligibility requires a prediction inside the desired interval and, unless
    disabled, correctness: matching hard label for classification, prediction
    within ``margin_correct`` of the true outcome for regression. Distance
    ties resolve to the lower row index.
    """
    cfg = cfg or NiceConfig()
    x_interest = tuple(x_interest)
    score_vectors = f.predict_batch(data.rows)
    if f.task == CLASSIFICATION:
        scalar = score_vectors[:, f.class_index(target)]
    else:
        scalar = score_vectors[:, 0]

    eligible: list[int] = []
    margin = cfg.margin_correct
    if (
        cfg.x_nn_correct
        and f.task != CLASSIFICATION
        and margin is None
    ):
        margin = default_margin_correct(f, target, data)
    for i in range(data.n):
        if not target.contains(float(scalar[i])):
            continue
        if cfg.x_nn_correct:
            if data.outcomes is None:
                raise SearchError("correctness filter needs true outcomes in the dataset")
            if f.task == CLASSIFICATION:
                if f.hard_label(score_vectors[i]) != data.outcomes[i]:
                    continue
            else:
                if abs(float(scalar[i]) - float(data.outcomes[i])) > margin:
                    continue
        eligible.append(i)
    if not eligible:
        raise SearchError("no eligible nearest instance", code="no-eligible-anchor")

    dist = get_distance(cfg.distance_function)
    d = np.asarray(dist([data.rows[i] for i in eligible], [x_interest], data))[:, 0]
    best = int(np.argsort(d, kind="stable")[0])
    return data.rows[eligible[best]]


def reward(
    candidate: Instance,
    prev_best: Instance,
    x_interest: Instance,
    f: PredictionFunction,
    target: DesiredTarget,
    data: Dataset,
    cfg: NiceConfig | None = None,
) -> float:
    """Validity gain of the candidate over the incumbent, scaled by cost.

    The denominator depends on the configured reward: 1 for sparsity (every
    step changes exactly one feature), the added distance to the query point
    for proximity, and the candidate's distance to its nearest training row
    for plausibility; the latter two are floored at 1e-12.
    """
    cfg = cfg or NiceConfig()
    scores = f.scalar_scores([prev_best, candidate], target)
    numerator = o_valid(float(scores[0]), target) - o_valid(float(scores[1]), target)
    denominator = _reward_denominator(candidate, prev_best, x_interest, data, cfg)
    if not np.isfinite(denominator) or denominator == 0.0:
        raise SearchError("degenerate reward denominator")
    return numerator / denominator


def _reward_denominator(
    candidate: Instance,
    prev_best: Instance,
    x_interest: Instance,
    data: Dataset,
    cfg: NiceConfig,
) -> float:
    if cfg.optimization == "sparsity":
        return 1.0
    dist = get_distance(cfg.distance_function)
    if cfg.optimization == "proximity":
        d = np.asarray(dist([candidate, prev_best], [x_interest], data))[:, 0]
        return max(float(d[0] - d[1]), DENOMINATOR_FLOOR)
    return max(
        o_plaus(candidate, data, PlausibilityConfig(k=1), dist), DENOMINATOR_FLOOR
    )


def find_counterfactuals_nice(
    f: PredictionFunction,
    x_interest: Instance,
    target: DesiredTarget,
    data: Dataset,
    cfg: NiceConfig | None = None,
) -> CounterfactualSet:
    """Run the substitution walk from the query point toward its anchor row.

    Each iteration substitutes one remaining differing feature into the
    incumbent, archives all candidates, and advances to the highest-reward
    one (reward ties resolve to the lowest feature index). The walk stops
    when the incumbent reaches the desired interval (if ``finish_early``) or
    no differing features remain.
    """
    cfg = cfg or NiceConfig()
    x_interest = tuple(x_interest)
    cache = PredictionCache(f)
    anchor = find_x_nn(x_interest, data, cache, target, cfg)

    best = x_interest
    remaining = [j for j in range(data.schema.p) if anchor[j] != x_interest[j]]
    d_initial = len(remaining)
    archive: list[Instance] = []
    iterations = 0

    while remaining:
        if cfg.finish_early and target.contains(
            float(cache.scalar_scores([best], target)[0])
        ):
            break
        iterations += 1
        candidates = []
        for j in remaining:
            cand = list(best)
            cand[j] = anchor[j]
            candidates.append(tuple(cand))
        archive.extend(candidates)
        rewards = [
            reward(cand, best, x_interest, cache, target, data, cfg) for cand in candidates
        ]
        pick = int(np.argmax(rewards))  # first max wins: lowest feature index
        best = candidates[pick]
        remaining.pop(pick)

    if cfg.return_multiple:
        if archive:
            scores = cache.scalar_scores(archive, target)
            chosen = tuple(
                cand for cand, s in zip(archive, scores) if target.contains(float(s))
            )
        else:
            chosen = ()
    else:
        chosen = (best,) if best != x_interest else ()

    return CounterfactualSet(
        x_interest=x_interest,
        target=target,
        method="nice",
        counterfactuals=chosen,
        schema=data.schema,
        provenance={
            "config": cfg.to_dict(),
            "distance_function": cfg.distance_function,
        },
        diagnostics={
            "x_nn": list(anchor),
            "d_initial": d_initial,
            "iterations": iterations,
            "archive_size": len(archive),
        },
    )


def nice_multi_reward_union(
    f: PredictionFunction,
    x_interest: Instance,
    target: DesiredTarget,
    data: Dataset,
    cfg: NiceConfig | None = None,
) -> CounterfactualSet:
    """Exhaustive walk under every reward function, deduplicated.

    Runs the search with ``finish_early=False`` and ``return_multiple=True``
    once per reward and merges the results on exact feature equality.
    """
    base = cfg or NiceConfig()
    merged: list[Instance] = []
    diagnostics: dict = {}
    for opt in REWARDS:
        run_cfg = NiceConfig(
            optimization=opt,
            x_nn_correct=base.x_nn_correct,
            margin_correct=base.margin_correct,
            return_multiple=True,
            finish_early=False,
            distance_function=base.distance_function,
        )
        result = find_counterfactuals_nice(f, x_interest, target, data, run_cfg)
        merged.extend(result.counterfactuals)
        diagnostics[opt] = {
            "found": len(result.counterfactuals),
            "archive_size": result.diagnostics["archive_size"],
        }
    return CounterfactualSet(
        x_interest=tuple(x_interest),
        target=target,
        method="nice-union",
        counterfactuals=tuple(merged),
        schema=data.schema,
        provenance={
            "config": base.to_dict(),
            "distance_function": base.distance_function,
        },
        diagnostics=diagnostics,
    )
