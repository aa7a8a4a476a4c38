"""Comparison harness for the three search methods.

For every (dataset, model, query point) cell the harness flips the predicted
class into a desired probability interval, runs each method, keeps only valid
and per-method nondominated counterfactuals, pools them for rank
normalization, and scores each method by hypervolume against the worst-case
reference point. A separate entry point measures wall-clock scaling over row
and feature subsets.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distances import get_distance
from .errors import ConfigError
from .moc import MocConfig, find_counterfactuals_moc
from .nice import NiceConfig, nice_multi_reward_union
from .objectives import PlausibilityConfig, evaluate_objectives_batch
from .pareto import hypervolume, nondominated_indices
from .predict import PredictionFunction
from .results import CounterfactualSet
from .schema import Dataset, DesiredTarget, FeatureDescriptor, FeatureSchema
from .whatif import WhatIfConfig, find_counterfactuals_whatif

HALF_OPEN_NUDGE = 1e-15
METHODS = ("whatif", "nice", "moc")

PredictorFactory = Callable[[Dataset], PredictionFunction]


def flip_target(score: float, class_of_interest: str | None = None) -> DesiredTarget:
    """Desired interval on the opposite side of the 0.5 decision boundary.

    Scores at or below 0.5 flip to the half-open interval (0.5, 1], realized
    by nudging the closed lower bound up by 1e-15; higher scores flip to
    [0, 0.5].
    """
    if score <= 0.5:
        return DesiredTarget((0.5 + HALF_OPEN_NUDGE, 1.0), class_of_interest)
    return DesiredTarget((0.0, 0.5), class_of_interest)


@dataclass
class FilterResult:
    survivors: list[int]
    no_overall: int
    no_nondom: int


def filter_for_comparison(
    objectives_by_method: dict[str, Sequence[tuple[float, float, float, float]]],
) -> dict[str, FilterResult]:
    """Keep, per method, the valid counterfactuals nobody from the same method
    dominates on the three non-validity objectives."""
    out: dict[str, FilterResult] = {}
    for method, objs in objectives_by_method.items():
        valid = [i for i, o in enumerate(objs) if o[0] == 0.0]
        triples = [objs[i][1:] for i in valid]
        keep = nondominated_indices(triples) if triples else []
        survivors = [valid[i] for i in keep]
        out[method] = FilterResult(survivors, len(objs), len(survivors))
    return out


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr))
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank_normalize(values: Sequence[float]) -> np.ndarray:
    """Average ranks mapped linearly onto [0, 1]; a singleton gets rank 0."""
    m = len(values)
    if m == 0:
        return np.empty(0)
    if m == 1:
        return np.zeros(1)
    return (average_ranks(values) - 1.0) / (m - 1.0)


def benchmark_hv(
    points: Sequence[tuple[float, float, float]], p: int
) -> float:
    """Hypervolume of (proximity, sparsity, plausibility) triples against the
    worst-case reference point (1, number of features, 1)."""
    return hypervolume(points, (1.0, float(p), 1.0))


@dataclass
class BenchmarkSpec:
    """Declarative description of one harness run.

    ``methods`` may be any subset of ``("whatif", "nice", "moc")``; ``nice``
    here always means the exhaustive three-reward union. Per-method config
    overrides live in ``method_configs`` keyed by method name.
    """

    datasets: list[tuple[str, Dataset]]
    predictors: list[tuple[str, PredictorFactory]]
    n_query_points: int = 10
    methods: tuple[str, ...] = METHODS
    method_configs: dict = field(default_factory=dict)
    class_of_interest: str | None = None
    distance_function: str = "gower"
    seed: int = 0

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown benchmark method {m!r}")


def _harness_moc_config(overrides: dict, seed: int, distance: str) -> MocConfig:
    base = {
        "termination": "genstag",
        "n_generations": 10,
        "max_generations": 500,
        "distance_function": distance,
    }
    base.update(overrides)
    base["seed"] = seed
    return MocConfig.from_dict(base)


def run_cell_method(
    method: str,
    f: PredictionFunction,
    x_interest,
    target: DesiredTarget,
    train: Dataset,
    spec: BenchmarkSpec,
    seed: int,
) -> CounterfactualSet:
    overrides = dict(spec.method_configs.get(method, {}))
    if method == "whatif":
        overrides.setdefault("n_counterfactuals", 10)
        overrides.setdefault("distance_function", spec.distance_function)
        return find_counterfactuals_whatif(f, x_interest, target, train, WhatIfConfig.from_dict(overrides))
    if method == "nice":
        overrides.setdefault("distance_function", spec.distance_function)
        return nice_multi_reward_union(f, x_interest, target, train, NiceConfig.from_dict(overrides))
    cfg = _harness_moc_config(overrides, seed, spec.distance_function)
    return find_counterfactuals_moc(f, x_interest, target, train, cfg)[0]


@dataclass
class BenchmarkResult:
    records: list[dict]
    cells: list[dict]
    spec_seed: int

    def method_summary(self) -> list[dict]:
        """Aggregate HV, counts, and runtime per dataset, model, and method."""
        keys = sorted({(c["dataset"], c["model"], c["method"]) for c in self.cells})
        rows = []
        for dataset, model, method in keys:
            group = [
                c
                for c in self.cells
                if (c["dataset"], c["model"], c["method"]) == (dataset, model, method)
            ]
            rows.append(
                {
                    "dataset": dataset,
                    "model": model,
                    "method": method,
                    "mean_hv": float(np.mean([c["hv"] for c in group])),
                    "no_overall": int(sum(c["no_overall"] for c in group)),
                    "no_nondom": int(sum(c["no_nondom"] for c in group)),
                    "mean_runtime_ms": float(np.mean([c["runtime_ms"] for c in group])),
                }
            )
        return rows


def _run_cell(
    spec: BenchmarkSpec,
    ds_name: str,
    train: Dataset,
    model_name: str,
    f: PredictionFunction,
    x_id: int,
    x_interest,
    seed_base: int,
) -> tuple[list[dict], list[dict]]:
    """All methods for one (dataset, model, query point) cell."""
    plaus = PlausibilityConfig(k=1)
    dist = get_distance(spec.distance_function)
    coi = spec.class_of_interest or f.class_labels[-1]
    probe = DesiredTarget((0.0, 1.0), coi)
    score = float(f.scalar_scores([x_interest], probe)[0])
    target = flip_target(score, coi)

    objectives_by_method: dict[str, list] = {}
    runtimes: dict[str, float] = {}
    for offset, method in enumerate(spec.methods):
        started = time.perf_counter()
        cf_set = run_cell_method(
            method, f, x_interest, target, train, spec, seed_base + offset
        )
        runtimes[method] = (time.perf_counter() - started) * 1000.0
        vectors = evaluate_objectives_batch(
            list(cf_set.counterfactuals), x_interest, f, target, train, plaus, dist
        )
        objectives_by_method[method] = [v.as_tuple() for v in vectors]

    filtered = filter_for_comparison(objectives_by_method)

    cell_rows: dict[tuple[str, int], dict] = {}
    for method in spec.methods:
        survivors = set(filtered[method].survivors)
        for i, obj in enumerate(objectives_by_method[method]):
            cell_rows[(method, i)] = {
                "dataset": ds_name,
                "model": model_name,
                "x_id": x_id,
                "method": method,
                "cf_id": i,
                "o_valid": obj[0],
                "o_prox": obj[1],
                "o_sparse": obj[2],
                "o_plaus": obj[3],
                "rank_prox": None,
                "rank_sparse": None,
                "rank_plaus": None,
                "runtime_ms": runtimes[method],
                "nondominated": i in survivors,
            }

    pooled = [(method, i) for method in spec.methods for i in filtered[method].survivors]
    for c, name in ((1, "rank_prox"), (2, "rank_sparse"), (3, "rank_plaus")):
        column = rank_normalize([objectives_by_method[m][i][c] for m, i in pooled])
        for key, value in zip(pooled, column):
            cell_rows[key][name] = float(value)

    cells = []
    for method in spec.methods:
        hv_points = [objectives_by_method[method][i][1:] for i in filtered[method].survivors]
        cells.append(
            {
                "dataset": ds_name,
                "model": model_name,
                "x_id": x_id,
                "method": method,
                "hv": benchmark_hv(hv_points, train.schema.p),
                "no_overall": filtered[method].no_overall,
                "no_nondom": filtered[method].no_nondom,
                "runtime_ms": runtimes[method],
            }
        )
    return list(cell_rows.values()), cells


def run_benchmark(spec: BenchmarkSpec, jobs: int = 1) -> BenchmarkResult:
    """Execute every (dataset, model, query point, method) cell.

    Query points are sampled per dataset with the spec seed and withheld from
    the training rows used for fitting, search, and evaluation. ``jobs > 1``
    runs independent cells on a bounded thread pool; each cell keeps its own
    derived seed, and outputs are assembled in a fixed order either way.
    """
    rng = np.random.default_rng(spec.seed)
    tasks: list[tuple] = []
    seed_base = spec.seed
    for ds_name, data in spec.datasets:
        q = min(spec.n_query_points, data.n - 1)
        query_indices = sorted(int(i) for i in rng.choice(data.n, size=q, replace=False))
        train = data.subset([i for i in range(data.n) if i not in set(query_indices)])
        for model_name, factory in spec.predictors:
            f = factory(train)
            if f.class_labels is None:
                raise ConfigError("the benchmark harness expects classification models")
            for x_id, row_idx in enumerate(query_indices):
                seed_base += len(spec.methods)
                tasks.append(
                    (spec, ds_name, train, model_name, f, x_id, data.rows[row_idx], seed_base)
                )

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(lambda t: _run_cell(*t), tasks))
    else:
        outcomes = [_run_cell(*t) for t in tasks]

    records: list[dict] = []
    cells: list[dict] = []
    for cell_records, cell_summaries in outcomes:
        records.extend(cell_records)
        cells.extend(cell_summaries)
    return BenchmarkResult(records, cells, spec.seed)


# ---------------------------------------------------------------------------
# Runtime scaling


def _feature_subset(data: Dataset, feature_indices: Sequence[int]) -> Dataset:
    descriptors: list[FeatureDescriptor] = [data.schema.features[j] for j in feature_indices]
    schema = FeatureSchema(tuple(descriptors))
    rows = [tuple(row[j] for j in feature_indices) for row in data.rows]
    return Dataset(schema, rows, data.outcomes, data.outcome_name, data.outcome_kind)


def runtime_scaling(
    data: Dataset,
    predictor_factory: PredictorFactory,
    methods: Sequence[str] = METHODS,
    row_fractions: Sequence[float] = (),
    feature_counts: Sequence[int] = (),
    repeats: int = 1,
    method_configs: dict | None = None,
    class_of_interest: str | None = None,
    seed: int = 0,
) -> list[dict]:
    """Wall-clock per method over row-wise and feature-wise data subsets.

    Subsets are drawn once with the given seed and shared by all methods;
    the query point is always the full dataset's first row, withheld from
    every subset. The exhaustive-union NICE run makes its single timing the
    aggregate over its three reward configurations.
    """
    rng = np.random.default_rng(seed)
    spec = BenchmarkSpec(
        datasets=[],
        predictors=[],
        methods=tuple(methods),
        method_configs=method_configs or {},
        class_of_interest=class_of_interest,
        seed=seed,
    )
    x_interest = data.rows[0]
    pool = list(range(1, data.n))
    jobs: list[tuple[str, float | int, Dataset]] = []
    for fraction in row_fractions:
        size = max(2, int(round(fraction * len(pool))))
        chosen = sorted(int(i) for i in rng.choice(pool, size=min(size, len(pool)), replace=False))
        jobs.append(("rows", fraction, data.subset(chosen)))
    for count in feature_counts:
        if count > data.schema.p:
            raise ConfigError(f"feature subset {count} exceeds p={data.schema.p}")
        chosen_features = sorted(int(j) for j in rng.choice(data.schema.p, size=count, replace=False))
        subset = _feature_subset(data.subset(pool), chosen_features)
        jobs.append(("features", count, subset))

    rows: list[dict] = []
    for axis, size, subset in jobs:
        f = predictor_factory(subset)
        if f.class_labels is None:
            raise ConfigError("runtime scaling expects classification models")
        coi = class_of_interest or f.class_labels[-1]
        if axis == "features":
            keep = [data.schema.index_of(name) for name in subset.schema.names]
            query = tuple(x_interest[j] for j in keep)
        else:
            query = x_interest
        probe = DesiredTarget((0.0, 1.0), coi)
        score = float(f.scalar_scores([query], probe)[0])
        target = flip_target(score, coi)
        for repeat in range(repeats):
            for method in methods:
                started = time.perf_counter()
                run_cell_method(method, f, query, target, subset, spec, seed + repeat + 1)
                elapsed = time.perf_counter() - started
                rows.append(
                    {
                        "axis": axis,
                        "size": size,
                        "n": subset.n,
                        "p": subset.schema.p,
                        "method": method,
                        "repeat": repeat,
                        "seconds": elapsed,
                    }
                )
    return rows
