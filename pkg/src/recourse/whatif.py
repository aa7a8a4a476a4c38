"""Nearest-valid-observation retrieval.

Scores every training row, keeps those whose prediction already falls in the
desired interval, and returns the closest ones to the query point. Entirely
deterministic: there is no randomness anywhere in this method.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .distances import get_distance
from .errors import ConfigError
from .objectives import o_valid_batch
from .predict import PredictionFunction
from .results import CounterfactualSet
from .schema import Dataset, DesiredTarget, Instance


@dataclass
class WhatIfConfig:
    n_counterfactuals: int = 1
    lower: dict[str, float] | None = None
    upper: dict[str, float] | None = None
    distance_function: str = "gower"

    def __post_init__(self):
        if self.n_counterfactuals < 1:
            raise ConfigError("n_counterfactuals must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "WhatIfConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown WhatIf config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def _within_bounds(row: Instance, data: Dataset, cfg: WhatIfConfig) -> bool:
    schema = data.schema
    for name, lo in (cfg.lower or {}).items():
        if float(row[schema.index_of(name)]) < lo:
            return False
    for name, hi in (cfg.upper or {}).items():
        if float(row[schema.index_of(name)]) > hi:
            return False
    return True


def find_counterfactuals_whatif(
    f: PredictionFunction,
    x_interest: Instance,
    target: DesiredTarget,
    data: Dataset,
    cfg: WhatIfConfig | None = None,
) -> CounterfactualSet:
    """Return the closest eligible training rows, ascending by distance.

    Eligible rows have a prediction inside the desired interval, respect the
    configured bounds, and are not the query point itself. Ties resolve to
    the lower row index. Fewer eligible rows than requested is flagged in the
    diagnostics rather than treated as an error.
    """
    cfg = cfg or WhatIfConfig()
    x_interest = tuple(x_interest)
    scores = f.scalar_scores(data.rows, target)
    valid = o_valid_batch(scores, target) == 0.0

    eligible = [
        i
        for i in range(data.n)
        if valid[i] and data.rows[i] != x_interest and _within_bounds(data.rows[i], data, cfg)
    ]
    diagnostics: dict = {"eligible_rows": len(eligible)}
    chosen: list[Instance] = []
    if eligible:
        dist = get_distance(cfg.distance_function)
        d = np.asarray(dist([data.rows[i] for i in eligible], [x_interest], data))[:, 0]
        order = np.argsort(d, kind="stable")  # ties keep ascending row index
        take = order[: cfg.n_counterfactuals]
        chosen = [data.rows[eligible[int(i)]] for i in take]
        if len(eligible) < cfg.n_counterfactuals:
            diagnostics["short"] = True
    else:
        diagnostics["empty"] = "no training row has a prediction in the desired interval"

    return CounterfactualSet(
        x_interest=x_interest,
        target=target,
        method="whatif",
        counterfactuals=tuple(chosen),
        schema=data.schema,
        provenance={
            "config": cfg.to_dict(),
            "distance_function": cfg.distance_function,
        },
        diagnostics=diagnostics,
    )
