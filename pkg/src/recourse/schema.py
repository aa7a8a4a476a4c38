"""Mixed numeric/categorical feature spaces, instances, datasets, and targets.

A dataset is ingested from a plain CSV file plus a JSON sidecar schema that
carries all type information; the CSV itself is untyped text. All values are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, SchemaError

Value = float | str
Instance = tuple[Value, ...]

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureDescriptor:
    """One column of the feature space: a bounded real or a finite level set."""

    name: str
    kind: str
    range: tuple[float, float] | None = None
    levels: tuple[str, ...] = ()
    integer_valued: bool = False
    fixed: bool = False

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NUMERIC:
            if self.levels:
                raise SchemaError(f"numeric feature {self.name!r} must not declare levels")
            if self.range is not None and self.range[0] > self.range[1]:
                raise SchemaError(f"feature {self.name!r}: range min exceeds max")
        else:
            if self.range is not None:
                raise SchemaError(f"categorical feature {self.name!r} must not declare a range")
            if not self.levels:
                raise SchemaError(f"categorical feature {self.name!r} needs at least one level")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"feature {self.name!r}: duplicate level names")
            if self.integer_valued:
                raise SchemaError(f"categorical feature {self.name!r} cannot be integer valued")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature descriptors defining the search space."""

    features: tuple[FeatureDescriptor, ...]

    def __post_init__(self):
        if not self.features:
            raise SchemaError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names in schema")

    @property
    def p(self) -> int:
        return len(self.features)

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @cached_property
    def numeric_indices(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.features) if f.is_numeric)

    @cached_property
    def categorical_indices(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.features) if not f.is_numeric)

    @cached_property
    def numeric_position(self) -> dict[int, int]:
        """Feature index -> column position among the numeric features."""
        return {j: c for c, j in enumerate(self.numeric_indices)}

    @cached_property
    def level_codes(self) -> dict[int, dict[str, int]]:
        """Per categorical feature index: level name -> integer code."""
        return {
            i: {lv: c for c, lv in enumerate(self.features[i].levels)}
            for i in self.categorical_indices
        }

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def fixed_indices(self, extra_fixed: Iterable[str] = ()) -> frozenset[int]:
        """Indices flagged fixed in the schema or named in *extra_fixed*."""
        idx = {i for i, f in enumerate(self.features) if f.fixed}
        idx.update(self.index_of(n) for n in extra_fixed)
        return frozenset(idx)


@dataclass(frozen=True)
class Violation:
    feature: str
    reason: str


def validate_instance(inst: Sequence[Value], schema: FeatureSchema) -> list[Violation]:
    """Check one instance against a schema, returning every violation found."""
    out: list[Violation] = []
    if len(inst) != schema.p:
        return [Violation("*", f"expected {schema.p} values, got {len(inst)}")]
    for value, desc in zip(inst, schema.features):
        if desc.is_numeric:
            if isinstance(value, str) or not isinstance(value, (int, float)):
                out.append(Violation(desc.name, f"expected a number, got {value!r}"))
                continue
            if math.isnan(value):
                out.append(Violation(desc.name, "value is NaN"))
            elif desc.range is not None:
                lo, hi = desc.range
                if value < lo:
                    out.append(Violation(desc.name, f"value {value!r} below declared min {lo!r}"))
                elif value > hi:
                    out.append(Violation(desc.name, f"value {value!r} above declared max {hi!r}"))
        else:
            if not isinstance(value, str):
                out.append(Violation(desc.name, f"expected a level name, got {value!r}"))
            elif value not in desc.levels:
                out.append(Violation(desc.name, f"unknown level {value!r}"))
    return out


@dataclass(frozen=True)
class DesiredTarget:
    """Desired prediction interval, plus the class of interest for classifiers."""

    interval: tuple[float, float]
    class_of_interest: str | None = None

    def __post_init__(self):
        lo, hi = self.interval
        if math.isnan(lo) or math.isnan(hi):
            raise SchemaError("desired interval bounds must not be NaN")
        if lo > hi:
            raise SchemaError(f"desired interval has min {lo!r} > max {hi!r}")
        if self.class_of_interest is not None and not (0.0 <= lo and hi <= 1.0):
            raise SchemaError("classification target interval must lie within [0, 1]")

    def contains(self, score: float) -> bool:
        return self.interval[0] <= score <= self.interval[1]


class Dataset:
    """Immutable store of observed rows with cached numeric encodings.

    ``ranges_hat`` holds, per feature, the observed value range max-min for
    numeric features and ``None`` for categorical ones.
    """

    def __init__(
        self,
        schema: FeatureSchema,
        rows: Sequence[Sequence[Value]],
        outcomes: Sequence[float] | Sequence[str] | None = None,
        outcome_name: str | None = None,
        outcome_kind: str | None = None,
    ):
        if not rows:
            raise DataError("empty dataset")
        self.schema = schema
        self.rows: tuple[Instance, ...] = tuple(tuple(r) for r in rows)
        for i, row in enumerate(self.rows):
            violations = validate_instance(row, schema)
            if violations:
                v = violations[0]
                raise DataError(f"row {i}, feature {v.feature!r}: {v.reason}")
        if outcomes is not None and len(outcomes) != len(self.rows):
            raise DataError("outcomes length does not match row count")
        self.outcomes = tuple(outcomes) if outcomes is not None else None
        self.outcome_name = outcome_name
        self.outcome_kind = outcome_kind

        num_idx = schema.numeric_indices
        cat_idx = schema.categorical_indices
        codes = schema.level_codes
        n = len(self.rows)
        self._num = np.empty((n, len(num_idx)), dtype=np.float64)
        self._cat = np.empty((n, len(cat_idx)), dtype=np.int64)
        for r, row in enumerate(self.rows):
            for c, j in enumerate(num_idx):
                self._num[r, c] = row[j]
            for c, j in enumerate(cat_idx):
                self._cat[r, c] = codes[j][row[j]]  # validated above

        self.numeric_mins = self._num.min(axis=0) if num_idx else np.empty(0)
        self.numeric_maxs = self._num.max(axis=0) if num_idx else np.empty(0)
        self.numeric_ranges = self.numeric_maxs - self.numeric_mins
        # Sample standard deviation; a single row has no spread.
        if n > 1 and num_idx:
            self.numeric_sds = self._num.std(axis=0, ddof=1)
        else:
            self.numeric_sds = np.zeros(len(num_idx))

        ranges: list[float | None] = [None] * schema.p
        for c, j in enumerate(num_idx):
            ranges[j] = float(self.numeric_ranges[c])
        self.ranges_hat: tuple[float | None, ...] = tuple(ranges)

    @property
    def n(self) -> int:
        return len(self.rows)

    def encoded(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached (numeric matrix, categorical code matrix) of all rows."""
        return self._num, self._cat

    def subset(self, indices: Sequence[int]) -> "Dataset":
        rows = [self.rows[i] for i in indices]
        outs = [self.outcomes[i] for i in indices] if self.outcomes is not None else None
        return Dataset(self.schema, rows, outs, self.outcome_name, self.outcome_kind)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.schema == other.schema
            and self.rows == other.rows
            and self.outcomes == other.outcomes
            and self.outcome_name == other.outcome_name
            and self.outcome_kind == other.outcome_kind
        )


# ---------------------------------------------------------------------------
# Schema sidecar (JSON) and CSV ingestion


def _descriptor_from_json(obj: dict) -> FeatureDescriptor:
    if "name" not in obj or "kind" not in obj:
        raise SchemaError("feature entry needs 'name' and 'kind'")
    kind = obj["kind"]
    rng = obj.get("range")
    return FeatureDescriptor(
        name=str(obj["name"]),
        kind=kind,
        range=(float(rng[0]), float(rng[1])) if rng is not None else None,
        levels=tuple(str(x) for x in obj.get("levels", ())),
        integer_valued=bool(obj.get("integer_valued", False)),
        fixed=bool(obj.get("fixed", False)),
    )


def _descriptor_to_json(d: FeatureDescriptor) -> dict:
    out: dict = {"name": d.name, "kind": d.kind}
    if d.kind == NUMERIC:
        if d.range is not None:
            out["range"] = [d.range[0], d.range[1]]
        out["integer_valued"] = d.integer_valued
    else:
        out["levels"] = list(d.levels)
    out["fixed"] = d.fixed
    return out


def load_schema(path: str | Path) -> tuple[FeatureSchema, dict | None]:
    """Parse the JSON sidecar; returns (schema, outcome spec or None)."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read schema file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "features" not in doc:
        raise SchemaError("schema file must be an object with a 'features' list")
    schema = FeatureSchema(tuple(_descriptor_from_json(f) for f in doc["features"]))
    outcome = doc.get("outcome")
    if outcome is not None:
        if "name" not in outcome or outcome.get("kind") not in (NUMERIC, CATEGORICAL):
            raise SchemaError("outcome spec needs 'name' and kind numeric|categorical")
    return schema, outcome


def schema_to_json(schema: FeatureSchema, outcome: dict | None = None) -> dict:
    doc: dict = {"features": [_descriptor_to_json(f) for f in schema.features]}
    if outcome is not None:
        doc["outcome"] = {"name": outcome["name"], "kind": outcome["kind"]}
    return doc


def _parse_cell(text: str, desc: FeatureDescriptor, row: int) -> Value:
    if text == "":
        raise DataError(f"row {row}: missing value for feature {desc.name!r}")
    if desc.is_numeric:
        try:
            return float(text)
        except ValueError:
            raise DataError(
                f"row {row}: unparseable numeric cell {text!r} for feature {desc.name!r}"
            ) from None
    if text not in desc.levels:
        raise DataError(f"row {row}: unknown level {text!r} for feature {desc.name!r}")
    return text


def load_dataset(csv_path: str | Path, schema_path: str | Path) -> Dataset:
    """Read a CSV file against its sidecar schema.

    The header row must contain every schema feature (order in the file is
    free; the schema order wins) plus the outcome column when the schema
    declares one. Missing values are rejected.
    """
    schema, outcome = load_schema(schema_path)
    try:
        with open(csv_path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{csv_path}: empty file") from None
            col_of = {name: i for i, name in enumerate(header)}
            for name in schema.names:
                if name not in col_of:
                    raise DataError(f"{csv_path}: missing column {name!r}")
            out_col = None
            if outcome is not None:
                if outcome["name"] not in col_of:
                    raise DataError(f"{csv_path}: missing outcome column {outcome['name']!r}")
                out_col = col_of[outcome["name"]]

            rows: list[Instance] = []
            outcomes: list[Value] = []
            for r, record in enumerate(reader):
                if len(record) != len(header):
                    raise DataError(f"row {r}: expected {len(header)} cells, got {len(record)}")
                rows.append(
                    tuple(
                        _parse_cell(record[col_of[d.name]], d, r) for d in schema.features
                    )
                )
                if out_col is not None:
                    raw = record[out_col]
                    if raw == "":
                        raise DataError(f"row {r}: missing outcome value")
                    outcomes.append(float(raw) if outcome["kind"] == NUMERIC else raw)
    except OSError as exc:
        raise DataError(f"cannot read {csv_path}: {exc}") from exc

    if not rows:
        raise DataError(f"{csv_path}: no data rows")
    return Dataset(
        schema,
        rows,
        outcomes if outcome is not None else None,
        outcome_name=outcome["name"] if outcome else None,
        outcome_kind=outcome["kind"] if outcome else None,
    )


def format_value(value: Value) -> str:
    """Shortest round-trip text rendering (bit-exact for floats)."""
    if isinstance(value, str):
        return value
    return repr(float(value))


def save_dataset(data: Dataset, csv_path: str | Path, schema_path: str | Path | None = None) -> None:
    """Write a dataset back to CSV (and optionally its schema sidecar)."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(data.schema.names)
        if data.outcomes is not None:
            header.append(data.outcome_name or "outcome")
        writer.writerow(header)
        for i, row in enumerate(data.rows):
            record = [format_value(v) for v in row]
            if data.outcomes is not None:
                record.append(format_value(data.outcomes[i]))
            writer.writerow(record)
    if schema_path is not None:
        outcome = None
        if data.outcomes is not None:
            outcome = {"name": data.outcome_name or "outcome", "kind": data.outcome_kind or NUMERIC}
        Path(schema_path).write_text(json.dumps(schema_to_json(data.schema, outcome), indent=2))
