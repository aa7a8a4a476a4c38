"""Counterfactual result sets: quality measures, filtering, and export data.

The measure names follow the engine's user-facing vocabulary:
``dist_x_interest`` (proximity), ``no_changed`` (sparsity), ``dist_train``
(plausibility), and ``dist_target`` (validity).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .distances import DistanceFunction, get_distance
from .errors import ConfigError, EmptyResultError, SchemaError
from .objectives import PlausibilityConfig, o_plaus_batch, o_sparse, o_valid_batch
from .predict import PredictionFunction
from .schema import Dataset, DesiredTarget, FeatureSchema, Instance

MEASURES = ("dist_x_interest", "no_changed", "dist_train", "dist_target")


@dataclass
class CounterfactualSet:
    """Generated counterfactuals with provenance.

    Construction enforces the set invariants: exact duplicates collapse to
    their first occurrence and members equal to the query point are dropped.
    """

    x_interest: Instance
    target: DesiredTarget
    method: str
    counterfactuals: tuple[Instance, ...]
    schema: FeatureSchema
    provenance: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    _hidden_stack: list[tuple[Instance, ...]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.x_interest = tuple(self.x_interest)
        seen: set[Instance] = set()
        kept: list[Instance] = []
        dropped = 0
        for cf in self.counterfactuals:
            cf = tuple(cf)
            if cf == self.x_interest or cf in seen:
                dropped += 1
                continue
            seen.add(cf)
            kept.append(cf)
        if dropped:
            self.diagnostics = dict(self.diagnostics, dropped_duplicates=dropped)
        self.counterfactuals = tuple(kept)

    def __len__(self) -> int:
        return len(self.counterfactuals)

    # -- predictions and measures -----------------------------------------

    def predict_set(self, f: PredictionFunction) -> list[dict]:
        """Score table, one row per counterfactual, in set order."""
        scores = f.predict_batch(self.counterfactuals)
        if f.class_labels:
            return [
                {label: float(s) for label, s in zip(f.class_labels, row)} for row in scores
            ]
        return [{"prediction": float(row[0])} for row in scores]

    def evaluate(
        self,
        f: PredictionFunction,
        data: Dataset,
        show_diff: bool = False,
        measures: Sequence[str] = MEASURES,
        distance_function: str | DistanceFunction | None = None,
        plausibility: PlausibilityConfig = PlausibilityConfig(),
    ) -> list[dict]:
        """Counterfactuals joined with the selected quality measures.

        With ``show_diff`` numeric cells become deltas against the query point
        and categorical cells show the new level; ``None`` means unchanged.
        """
        for m in measures:
            if m not in MEASURES:
                raise ConfigError(f"unknown measure {m!r}; known: {MEASURES}")
        dist = self._resolve_distance(distance_function)
        rows: list[dict] = []
        if not self.counterfactuals:
            return rows
        prox = np.asarray(dist(list(self.counterfactuals), [self.x_interest], data))[:, 0]
        plaus = o_plaus_batch(list(self.counterfactuals), data, plausibility, dist)
        valid = o_valid_batch(f.scalar_scores(self.counterfactuals, self.target), self.target)
        computed = {
            "dist_x_interest": prox,
            "no_changed": [o_sparse(cf, self.x_interest) for cf in self.counterfactuals],
            "dist_train": plaus,
            "dist_target": valid,
        }
        for i, cf in enumerate(self.counterfactuals):
            row: dict = {}
            for j, desc in enumerate(self.schema.features):
                if show_diff:
                    if cf[j] == self.x_interest[j]:
                        row[desc.name] = None
                    elif desc.is_numeric:
                        row[desc.name] = float(cf[j]) - float(self.x_interest[j])
                    else:
                        row[desc.name] = cf[j]
                else:
                    row[desc.name] = cf[j]
            for m in measures:
                value = computed[m][i]
                row[m] = int(value) if m == "no_changed" else float(value)
            rows.append(row)
        return rows

    def _resolve_distance(
        self, distance_function: str | DistanceFunction | None
    ) -> DistanceFunction:
        if callable(distance_function):
            return distance_function
        if isinstance(distance_function, str):
            return get_distance(distance_function)
        name = self.provenance.get("distance_function", "gower")
        return get_distance(name)

    # -- validity filtering -------------------------------------------------

    def subset_to_valid(self, f: PredictionFunction) -> "CounterfactualSet":
        """Keep only members whose prediction falls in the desired interval."""
        self._hidden_stack.append(self.counterfactuals)
        if self.counterfactuals:
            valid = o_valid_batch(
                f.scalar_scores(self.counterfactuals, self.target), self.target
            )
            self.counterfactuals = tuple(
                cf for cf, v in zip(self.counterfactuals, valid) if v == 0.0
            )
        return self

    def revert_subset_to_valid(self) -> "CounterfactualSet":
        """Undo the most recent :meth:`subset_to_valid` exactly."""
        if not self._hidden_stack:
            raise EmptyResultError("nothing to revert")
        self.counterfactuals = self._hidden_stack.pop()
        return self

    # -- change-frequency analysis ------------------------------------------

    def freq_of_feature_changes(self, subset_zero: bool = False) -> dict[str, float]:
        """Share of members that changed each feature, in schema order."""
        if not self.counterfactuals:
            raise EmptyResultError("empty set")
        n = len(self.counterfactuals)
        out: dict[str, float] = {}
        for j, desc in enumerate(self.schema.features):
            changed = sum(1 for cf in self.counterfactuals if cf[j] != self.x_interest[j])
            freq = changed / n
            if subset_zero and freq == 0.0:
                continue
            out[desc.name] = freq
        return out

    # -- persistence ----------------------------------------------------------

    def to_json_dict(self) -> dict:
        lo, hi = self.target.interval
        return {
            "format": "recourse-counterfactuals/1",
            "method": self.method,
            "feature_names": list(self.schema.names),
            "x_interest": list(self.x_interest),
            "target": {
                "interval": [lo, hi],
                "class_of_interest": self.target.class_of_interest,
            },
            "counterfactuals": [list(cf) for cf in self.counterfactuals],
            "diagnostics": self.diagnostics,
            "provenance": self.provenance,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def from_json_dict(cls, doc: dict, schema: FeatureSchema) -> "CounterfactualSet":
        if doc.get("format") != "recourse-counterfactuals/1":
            raise ConfigError("not a recourse counterfactuals document")
        if tuple(doc["feature_names"]) != schema.names:
            raise SchemaError("stored feature names do not match the schema")
        target = DesiredTarget(
            interval=(float(doc["target"]["interval"][0]), float(doc["target"]["interval"][1])),
            class_of_interest=doc["target"].get("class_of_interest"),
        )

        def coerce(values: list) -> Instance:
            return tuple(
                float(v) if schema.features[j].is_numeric else str(v)
                for j, v in enumerate(values)
            )

        return cls(
            x_interest=coerce(doc["x_interest"]),
            target=target,
            method=doc.get("method", "unknown"),
            counterfactuals=tuple(coerce(cf) for cf in doc["counterfactuals"]),
            schema=schema,
            provenance=doc.get("provenance", {}),
            diagnostics=doc.get("diagnostics", {}),
        )

    @classmethod
    def load(cls, path: str | Path, schema: FeatureSchema) -> "CounterfactualSet":
        return cls.from_json_dict(json.loads(Path(path).read_text()), schema)


def write_evaluation_csv(rows: list[dict], path: str | Path) -> None:
    """Evaluation table as CSV; ``None`` cells render as ``NA``."""
    with open(path, "w", newline="") as fh:
        if not rows:
            fh.write("")
            return
        writer = csv.writer(fh)
        header = list(rows[0].keys())
        writer.writerow(header)
        for row in rows:
            writer.writerow(["NA" if row[k] is None else row[k] for k in header])


# ---------------------------------------------------------------------------
# Visualization data


def parallel_plot_data(
    cfset: CounterfactualSet,
    feature_order: Sequence[str] | None = None,
    digits_min_max: int = 2,
) -> dict:
    """Normalized polyline table for a parallel-coordinates view.

    Numeric features are min-max scaled over the set plus the query point
    (constant features render at 0.5); categorical levels map to equally
    spaced positions in [0, 1]. The query point is the last polyline.
    """
    schema = cfset.schema
    names = list(feature_order) if feature_order else list(schema.names)
    indices = [schema.index_of(n) for n in names]
    members: list[tuple[str, Instance]] = [
        (f"cf_{i}", cf) for i, cf in enumerate(cfset.counterfactuals)
    ]
    members.append(("x_interest", cfset.x_interest))

    axes = []
    scaled: dict[str, list[float]] = {label: [] for label, _ in members}
    for j in indices:
        desc = schema.features[j]
        if desc.is_numeric:
            values = [float(inst[j]) for _, inst in members]
            lo, hi = min(values), max(values)
            span = hi - lo
            axes.append(
                {
                    "name": desc.name,
                    "kind": "numeric",
                    "min_label": str(round(lo, digits_min_max)),
                    "max_label": str(round(hi, digits_min_max)),
                }
            )
            for (label, _), v in zip(members, values):
                scaled[label].append((v - lo) / span if span > 0 else 0.5)
        else:
            levels = desc.levels
            axes.append({"name": desc.name, "kind": "categorical", "levels": list(levels)})
            for label, inst in members:
                pos = levels.index(inst[j])
                scaled[label].append(pos / (len(levels) - 1) if len(levels) > 1 else 0.5)
    return {
        "features": names,
        "axes": axes,
        "lines": [{"label": label, "values": scaled[label]} for label, _ in members],
    }


def surface_plot_data(
    cfset: CounterfactualSet,
    feature_names: tuple[str, str],
    grid_size: int,
    f: PredictionFunction,
    data: Dataset,
) -> dict:
    """Prediction grid over two features with all others held at the query point.

    Numeric grids use cell centers of the observed range. Marked points are
    the query point plus counterfactuals that differ from it only in the two
    selected features; rug values carry the observed marginals.
    """
    schema = cfset.schema
    ja, jb = (schema.index_of(n) for n in feature_names)
    if ja == jb:
        raise ConfigError("surface plot needs two distinct features")

    def axis_values(j: int) -> list:
        desc = schema.features[j]
        if not desc.is_numeric:
            return list(desc.levels)
        c = schema.numeric_position[j]
        lo, hi = float(data.numeric_mins[c]), float(data.numeric_maxs[c])
        step = (hi - lo) / grid_size
        return [lo + (i + 0.5) * step for i in range(grid_size)]

    grid_a = axis_values(ja)
    grid_b = axis_values(jb)
    base = list(cfset.x_interest)
    batch: list[Instance] = []
    for vb in grid_b:
        for va in grid_a:
            cell = list(base)
            cell[ja] = va
            cell[jb] = vb
            batch.append(tuple(cell))
    scores = f.scalar_scores(batch, cfset.target)
    matrix = [
        [float(scores[bi * len(grid_a) + ai]) for ai in range(len(grid_a))]
        for bi in range(len(grid_b))
    ]

    def only_these_two(cf: Instance) -> bool:
        return all(cf[j] == cfset.x_interest[j] for j in range(schema.p) if j not in (ja, jb))

    marked = [
        {"a": cf[ja], "b": cf[jb], "kind": "counterfactual"}
        for cf in cfset.counterfactuals
        if only_these_two(cf)
    ]
    points = [{"a": cfset.x_interest[ja], "b": cfset.x_interest[jb], "kind": "x_interest"}] + marked
    return {
        "feature_a": feature_names[0],
        "feature_b": feature_names[1],
        "grid_a": grid_a,
        "grid_b": grid_b,
        "scores": matrix,
        "points": points,
        "rug_a": [row[ja] for row in data.rows],
        "rug_b": [row[jb] for row in data.rows],
    }
