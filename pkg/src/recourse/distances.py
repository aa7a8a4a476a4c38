"""Pairwise distances over mixed feature batches, with a pluggable registry.

A distance function takes two batches of instances plus the dataset that
provides context (observed numeric ranges) and returns a ``|A| x |B|`` matrix
of non-negative reals. Users can register their own functions under a name
and select them from any search configuration.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import SchemaError
from .schema import Dataset, Instance

DistanceFunction = Callable[[Sequence[Instance], Sequence[Instance], Dataset], np.ndarray]

_REGISTRY: dict[str, DistanceFunction] = {}


def register_distance(name: str, fn: DistanceFunction) -> None:
    _REGISTRY[name] = fn


def get_distance(name: str) -> DistanceFunction:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise SchemaError(
            f"unknown distance function {name!r}; known: {sorted(_REGISTRY)}"
        ) from None


def list_distances() -> list[str]:
    return sorted(_REGISTRY)


def encode_batch(
    instances: Sequence[Instance], data: Dataset
) -> tuple[np.ndarray, np.ndarray]:
    """Split a batch into a float matrix (numeric) and a code matrix (categorical)."""
    schema = data.schema
    if instances is data.rows:
        return data.encoded()
    num_idx = schema.numeric_indices
    cat_idx = schema.categorical_indices
    codes = schema.level_codes
    n = len(instances)
    num = np.empty((n, len(num_idx)), dtype=np.float64)
    cat = np.empty((n, len(cat_idx)), dtype=np.int64)
    for r, row in enumerate(instances):
        if len(row) != schema.p:
            raise SchemaError(f"instance has {len(row)} values, schema expects {schema.p}")
        for c, j in enumerate(num_idx):
            v = row[j]
            if isinstance(v, str):
                raise SchemaError(f"feature {schema.names[j]!r}: expected a number, got {v!r}")
            num[r, c] = v
        for c, j in enumerate(cat_idx):
            v = row[j]
            try:
                cat[r, c] = codes[j][v]
            except (KeyError, TypeError):
                raise SchemaError(f"feature {schema.names[j]!r}: unknown level {v!r}") from None
    return num, cat


def _gower_from_encoded(
    a_num: np.ndarray,
    a_cat: np.ndarray,
    b_num: np.ndarray,
    b_cat: np.ndarray,
    ranges: np.ndarray,
) -> np.ndarray:
    p = a_num.shape[1] + a_cat.shape[1]
    out = np.zeros((a_num.shape[0], b_num.shape[0]))
    for c in range(a_num.shape[1]):
        diff = np.abs(a_num[:, c, None] - b_num[None, :, c])
        r = ranges[c]
        if r > 0:
            out += diff / r
        else:
            # Zero observed range: identical values count 0, any difference 1.
            out += (diff != 0.0).astype(np.float64)
    for c in range(a_cat.shape[1]):
        out += (a_cat[:, c, None] != b_cat[None, :, c]).astype(np.float64)
    return out / p


def gower_matrix(
    xs: Sequence[Instance], ys: Sequence[Instance], data: Dataset
) -> np.ndarray:
    """Gower distance matrix: range-normalized numeric gaps, level mismatches.

    Numeric terms are not clipped, so values outside the observed range can
    push a per-feature contribution above 1/p; in-range batches stay in [0, 1].
    """
    a_num, a_cat = encode_batch(xs, data)
    b_num, b_cat = encode_batch(ys, data)
    return _gower_from_encoded(a_num, a_cat, b_num, b_cat, data.numeric_ranges)


def gower_matrix_fast(
    xs: Sequence[Instance], ys: Sequence[Instance], data: Dataset, block: int = 512
) -> np.ndarray:
    """Same metric as :func:`gower_matrix`, tuned for large batches.

    Reuses the dataset's cached encoding whenever a batch is the dataset's own
    row tuple and processes the left batch blockwise to bound peak memory.
    """
    a_num, a_cat = encode_batch(xs, data)
    b_num, b_cat = encode_batch(ys, data)
    n = a_num.shape[0]
    if n <= block:
        return _gower_from_encoded(a_num, a_cat, b_num, b_cat, data.numeric_ranges)
    out = np.empty((n, b_num.shape[0]))
    for start in range(0, n, block):
        stop = min(start + block, n)
        out[start:stop] = _gower_from_encoded(
            a_num[start:stop], a_cat[start:stop], b_num, b_cat, data.numeric_ranges
        )
    return out


def l0_matrix(
    xs: Sequence[Instance], ys: Sequence[Instance], data: Dataset | None = None
) -> np.ndarray:
    """Pairwise count of differing feature positions."""
    if data is not None:
        for batch in (xs, ys):
            for row in batch:
                if len(row) != data.schema.p:
                    raise SchemaError(
                        f"instance has {len(row)} values, schema expects {data.schema.p}"
                    )
    elif xs and ys and len(xs[0]) != len(ys[0]):
        raise SchemaError("instance batches have mismatched widths")
    out = np.zeros((len(xs), len(ys)))
    if not xs or not ys:
        return out
    a = np.array([tuple(r) for r in xs], dtype=object)
    b = np.array([tuple(r) for r in ys], dtype=object)
    for j in range(a.shape[1]):
        out += (a[:, j, None] != b[None, :, j]).astype(np.float64)
    return out


register_distance("gower", gower_matrix)
register_distance("gower_fast", gower_matrix_fast)
register_distance("l0", l0_matrix)
