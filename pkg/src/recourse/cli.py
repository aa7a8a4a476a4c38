"""Command-line entry point.

Subcommands: ``generate`` (run one search method), ``evaluate`` (re-score a
stored counterfactual set), ``benchmark`` (the comparison harness), and
``selftest`` (bundled oracle checks). Exit codes are a stable contract:
0 success, 1 error, 2 bad usage, 3 empty result.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import BenchmarkSpec, run_benchmark, runtime_scaling
from .distances import get_distance, gower_matrix, list_distances
from .errors import ConfigError, EmptyResultError, RecourseError
from .external import spawn_external_predictor
from .moc import MocConfig, find_counterfactuals_moc, moc_search_trace, moc_statistics
from .nice import NiceConfig, find_counterfactuals_nice, nice_multi_reward_union
from .objectives import o_valid_batch
from .pareto import hypervolume, nondominated_sort
from .predict import CLASSIFICATION, REGRESSION, PredictionFunction, fit_knn, fit_logistic, threshold_model
from .results import CounterfactualSet, parallel_plot_data, surface_plot_data, write_evaluation_csv
from .schema import Dataset, DesiredTarget, load_dataset, load_schema
from .whatif import WhatIfConfig, find_counterfactuals_whatif
from . import svg

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_EMPTY = 3

METHOD_CHOICES = ("moc", "whatif", "nice", "nice-union")


def _parse_range(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError("--desired-range expects two comma-separated numbers")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"cannot parse range {text!r}") from None
    return lo, hi


def _parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_predictor(spec: str, data: Dataset, task: str) -> PredictionFunction:
    """Instantiate a predictor from the CLI grammar.

    ``builtin:knn:k=5``, ``builtin:logistic:epochs=500,lr=0.1``,
    ``builtin:threshold:feature=NAME,cut=V``, or ``exec:<command>``.
    """
    if spec.startswith("exec:"):
        return spawn_external_predictor(spec[len("exec:") :], data.schema, task)
    if not spec.startswith("builtin:"):
        raise ConfigError(f"predictor spec must start with builtin: or exec:, got {spec!r}")
    rest = spec[len("builtin:") :]
    kind, _, args = rest.partition(":")
    kv = _parse_kv(args)
    if kind == "knn":
        return fit_knn(data, k=int(kv.get("k", "5")))
    if kind == "logistic":
        return fit_logistic(
            data,
            epochs=int(kv.get("epochs", "500")),
            learning_rate=float(kv.get("lr", "0.1")),
        )
    if kind == "threshold":
        if "feature" not in kv or "cut" not in kv:
            raise ConfigError("builtin:threshold needs feature=NAME,cut=V")
        return threshold_model(data.schema, kv["feature"], float(kv["cut"]))
    raise ConfigError(f"unknown builtin predictor {kind!r}")


def _resolve_x_interest(raw: str, data: Dataset):
    try:
        idx = int(raw)
    except ValueError:
        values = json.loads(raw)
        if not isinstance(values, list) or len(values) != data.schema.p:
            raise ConfigError(
                f"--x-interest JSON must be an array of {data.schema.p} values"
            ) from None
        return tuple(
            float(v) if data.schema.features[j].is_numeric else str(v)
            for j, v in enumerate(values)
        )
    if not 0 <= idx < data.n:
        raise ConfigError(f"--x-interest row {idx} out of range (n={data.n})")
    return data.rows[idx]


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("RECOURSE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"RECOURSE_SEED must be an integer, got {env!r}") from None
    return 0


def _write_manifest(out_dir: Path, command: str, resolved: dict, outputs: list[str]) -> None:
    manifest = {
        "engine": "recourse",
        "engine_version": __version__,
        "command": command,
        "resolved": resolved,
        "outputs": outputs,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _require(args, parser: argparse.ArgumentParser, *names: str) -> bool:
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        parser.print_usage(sys.stderr)
        flags = ", ".join(f"--{n}" for n in missing)
        print(f"error: missing required flag(s): {flags}", file=sys.stderr)
        return False
    return True


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args, parser) -> int:
    if not _require(args, parser, "method", "data", "schema", "predictor", "x-interest"):
        return EXIT_ERROR
    data = load_dataset(args.data, args.schema)
    task = CLASSIFICATION if args.desired_class else REGRESSION
    f = build_predictor(args.predictor, data, task)
    x_interest = _resolve_x_interest(args.x_interest, data)
    if args.desired_range is None:
        raise ConfigError("--desired-range is required")
    target = DesiredTarget(_parse_range(args.desired_range), args.desired_class)
    seed = _resolve_seed(args)
    overrides = json.loads(Path(args.config).read_text()) if args.config else {}

    log = None
    if args.method == "moc":
        overrides["seed"] = seed
        cfg = MocConfig.from_dict(overrides)
        cf_set, log = find_counterfactuals_moc(f, x_interest, target, data, cfg)
    elif args.method == "whatif":
        cf_set = find_counterfactuals_whatif(
            f, x_interest, target, data, WhatIfConfig.from_dict(overrides)
        )
    elif args.method == "nice":
        cf_set = find_counterfactuals_nice(
            f, x_interest, target, data, NiceConfig.from_dict(overrides)
        )
    else:
        cf_set = nice_multi_reward_union(
            f, x_interest, target, data, NiceConfig.from_dict(overrides)
        )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = ["counterfactuals.json", "evaluation.csv"]
    cf_set.save(out_dir / "counterfactuals.json")
    rows = cf_set.evaluate(f, data, show_diff=args.show_diff)
    write_evaluation_csv(rows, out_dir / "evaluation.csv")

    if not args.no_svg and len(cf_set):
        plot = parallel_plot_data(cf_set)
        (out_dir / "parallel.svg").write_text(svg.parallel_chart(plot, f"{args.method}: parallel view"))
        outputs.append("parallel.svg")
        numeric_names = [d.name for d in data.schema.features if d.is_numeric]
        if len(numeric_names) >= 2:
            surface = surface_plot_data(cf_set, (numeric_names[0], numeric_names[1]), 40, f, data)
            (out_dir / "surface.svg").write_text(svg.surface_chart(surface, "prediction surface"))
            outputs.append("surface.svg")
    if log is not None and not args.no_svg:
        stats = moc_statistics(log, scaled=True)
        gens = [r["generation"] for r in stats]
        series = [
            (key, gens, [r[key] for r in stats])
            for key in ("mean_o_valid", "mean_o_prox", "mean_o_sparse", "mean_o_plaus")
        ]
        series.append(("hv", gens, [r["hv"] for r in stats]))
        (out_dir / "statistics.svg").write_text(
            svg.line_chart(series, "search statistics", "generation", "scaled value")
        )
        trace = moc_search_trace(log)
        groups: dict[int, tuple[list, list]] = {}
        for row in trace:
            xs, ys = groups.setdefault(row["generation"], ([], []))
            xs.append(row["o_prox"])
            ys.append(row["o_valid"])
        (out_dir / "search.svg").write_text(
            svg.scatter_chart(
                [(f"gen {g}", xs, ys) for g, (xs, ys) in sorted(groups.items())],
                "objective trace",
                "o_prox",
                "o_valid",
            )
        )
        outputs += ["statistics.svg", "search.svg"]

    _write_manifest(
        out_dir,
        "generate",
        {
            "method": args.method,
            "data": str(args.data),
            "schema": str(args.schema),
            "predictor": args.predictor,
            "x_interest": list(x_interest),
            "desired_class": args.desired_class,
            "desired_range": list(target.interval),
            "seed": seed,
            "config": overrides,
        },
        outputs,
    )

    if len(cf_set) == 0:
        print("no counterfactuals found", file=sys.stderr)
        return EXIT_EMPTY
    valid = o_valid_batch(f.scalar_scores(cf_set.counterfactuals, target), target)
    n_valid = int((valid == 0.0).sum())
    print(f"{len(cf_set)} counterfactual(s), {n_valid} valid; results in {out_dir}")
    return EXIT_OK if n_valid >= 1 else EXIT_EMPTY


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args, parser) -> int:
    if not _require(args, parser, "result", "data", "schema", "predictor"):
        return EXIT_ERROR
    data = load_dataset(args.data, args.schema)
    schema, _ = load_schema(args.schema)
    cf_set = CounterfactualSet.load(args.result, schema)
    task = CLASSIFICATION if cf_set.target.class_of_interest else REGRESSION
    f = build_predictor(args.predictor, data, task)
    measures = tuple(args.measures.split(",")) if args.measures else None
    rows = cf_set.evaluate(
        f,
        data,
        show_diff=args.show_diff,
        **({"measures": measures} if measures else {}),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_evaluation_csv(rows, out_dir / "evaluation.csv")
    _write_manifest(
        out_dir,
        "evaluate",
        {
            "result": str(args.result),
            "data": str(args.data),
            "predictor": args.predictor,
            "show_diff": args.show_diff,
        },
        ["evaluation.csv"],
    )
    if not rows:
        print("stored set is empty", file=sys.stderr)
        return EXIT_EMPTY
    header = list(rows[0].keys())
    print("\t".join(header))
    for row in rows:
        print("\t".join("NA" if row[k] is None else str(row[k]) for k in header))
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark


def _load_benchmark_spec(path: str, seed_override: int | None) -> tuple[BenchmarkSpec, dict]:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or "datasets" not in doc or "predictors" not in doc:
        raise ConfigError("benchmark spec needs 'datasets' and 'predictors'")
    datasets = []
    by_name: dict[str, Dataset] = {}
    for entry in doc["datasets"]:
        data = load_dataset(entry["csv"], entry["schema"])
        datasets.append((entry["name"], data))
        by_name[entry["name"]] = data
    predictor_specs = {p["name"]: p["spec"] for p in doc["predictors"]}

    def factory_for(spec_str: str):
        return lambda train: build_predictor(spec_str, train, CLASSIFICATION)

    predictors = [(name, factory_for(s)) for name, s in predictor_specs.items()]
    spec = BenchmarkSpec(
        datasets=datasets,
        predictors=predictors,
        n_query_points=int(doc.get("n_query_points", 10)),
        methods=tuple(doc.get("methods", ("whatif", "nice", "moc"))),
        method_configs=doc.get("method_configs", {}),
        class_of_interest=doc.get("class_of_interest"),
        distance_function=doc.get("distance_function", "gower"),
        seed=seed_override if seed_override is not None else int(doc.get("seed", 0)),
    )
    runtime = doc.get("runtime")
    if runtime is not None:
        runtime = dict(runtime)
        runtime["data"] = by_name[runtime.pop("dataset")]
        runtime["factory"] = factory_for(predictor_specs[runtime.pop("predictor")])
    return spec, {"runtime": runtime}


def _write_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            fh.write("")
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("NA" if v is None else v) for k, v in row.items()})


def cmd_benchmark(args, parser) -> int:
    if not _require(args, parser, "spec", "out"):
        return EXIT_ERROR
    spec, extras = _load_benchmark_spec(args.spec, args.seed)
    result = run_benchmark(spec, jobs=max(1, args.jobs))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(result.records, out_dir / "records.csv")
    _write_csv(result.cells, out_dir / "cells.csv")
    summary = result.method_summary()
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    outputs = ["records.csv", "cells.csv", "summary.json"]

    runtime_rows: list[dict] = []
    if extras["runtime"] is not None:
        rt = extras["runtime"]
        runtime_rows = runtime_scaling(
            rt["data"],
            rt["factory"],
            methods=spec.methods,
            row_fractions=rt.get("row_fractions", ()),
            feature_counts=rt.get("feature_counts", ()),
            repeats=int(rt.get("repeats", 1)),
            method_configs=spec.method_configs,
            class_of_interest=spec.class_of_interest,
            seed=spec.seed,
        )
        _write_csv(runtime_rows, out_dir / "runtime.csv")
        outputs.append("runtime.csv")

    if not args.no_svg:
        methods = list(spec.methods)
        for c, objective in (("rank_prox", "o_prox"), ("rank_sparse", "o_sparse"), ("rank_plaus", "o_plaus")):
            groups = []
            for mi, method in enumerate(methods):
                values = [r[c] for r in result.records if r["method"] == method and r[c] is not None]
                groups.append((method, [mi + 1.0] * len(values), values))
            (out_dir / f"{c}.svg").write_text(
                svg.scatter_chart(groups, f"normalized ranks: {objective}", "method", "rank")
            )
            outputs.append(f"{c}.svg")
        (out_dir / "hv.svg").write_text(
            svg.bar_chart(
                [f"{r['dataset']}/{r['model']}/{r['method']}" for r in summary],
                [r["mean_hv"] for r in summary],
                "mean hypervolume per method",
                "hv",
            )
        )
        (out_dir / "counts.svg").write_text(
            svg.bar_chart(
                [f"{r['dataset']}/{r['model']}/{r['method']}" for r in summary],
                [float(r["no_nondom"]) for r in summary],
                "valid nondominated counterfactuals",
                "count",
            )
        )
        outputs += ["hv.svg", "counts.svg"]
        if runtime_rows:
            series = []
            for method in spec.methods:
                rows = [r for r in runtime_rows if r["method"] == method and r["axis"] == "rows"]
                if rows:
                    series.append((method, [r["n"] for r in rows], [r["seconds"] for r in rows]))
            if series:
                (out_dir / "runtime.svg").write_text(
                    svg.line_chart(series, "runtime scaling (rows)", "n", "seconds")
                )
                outputs.append("runtime.svg")

    _write_manifest(out_dir, "benchmark", {"spec": str(args.spec), "seed": spec.seed, "jobs": args.jobs}, outputs)
    print(f"benchmark complete: {len(result.records)} records in {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest


def _selftest_domination(rng: np.random.Generator) -> bool:
    for _ in range(50):
        n = int(rng.integers(1, 60))
        pop = rng.random((n, 4))
        fronts = nondominated_sort(pop.tolist())
        rank = {}
        for r, front in enumerate(fronts):
            for i in front:
                rank[i] = r

        def dom(a, b) -> bool:
            return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))

        # Brute force: peel fronts by repeated scans.
        remaining = set(range(n))
        expected = {}
        level = 0
        while remaining:
            front = {
                i
                for i in remaining
                if not any(dom(pop[j], pop[i]) for j in remaining if j != i)
            }
            for i in front:
                expected[i] = level
            remaining -= front
            level += 1
        if expected != rank:
            return False
    return True


def _selftest_hypervolume(rng: np.random.Generator) -> bool:
    if abs(hypervolume([(0.5, 0.5)], (1.0, 1.0)) - 0.25) > 1e-12:
        return False
    for _ in range(5):
        pts = rng.random((8, 4)).tolist()
        exact = hypervolume(pts, (1.0, 1.0, 1.0, 1.0))
        samples = rng.random((200_000, 4))
        covered = np.zeros(len(samples), dtype=bool)
        for p in pts:
            covered |= (samples >= np.asarray(p)).all(axis=1)
        frac = covered.mean()
        se = math.sqrt(max(frac * (1 - frac), 1e-12) / len(samples))
        if abs(exact - frac) > 3 * se + 1e-9:
            return False
    return True


def _selftest_gower(rng: np.random.Generator) -> bool:
    from .schema import FeatureDescriptor, FeatureSchema

    schema = FeatureSchema(
        (
            FeatureDescriptor("a", "numeric"),
            FeatureDescriptor("b", "numeric"),
            FeatureDescriptor("c", "categorical", levels=("x", "y", "z")),
        )
    )
    rows = [
        (float(rng.uniform(0, 10)), float(rng.uniform(-5, 5)), ("x", "y", "z")[int(rng.integers(3))])
        for _ in range(40)
    ]
    data = Dataset(schema, rows)
    batch = gower_matrix(rows[:10], rows[10:25], data)
    ranges = [r if r else None for r in data.ranges_hat]
    for i in range(10):
        for j in range(15):
            total = 0.0
            for col in range(3):
                a, b = rows[i][col], rows[10 + j][col]
                if isinstance(a, str):
                    total += 0.0 if a == b else 1.0
                elif ranges[col]:
                    total += abs(a - b) / ranges[col]
                else:
                    total += 0.0 if a == b else 1.0
            if abs(batch[i, j] - total / 3) > 1e-12:
                return False
    return True


def cmd_selftest(args, parser) -> int:
    rng = np.random.default_rng(20240817)
    checks = [
        ("domination brute force", _selftest_domination),
        ("hypervolume monte carlo", _selftest_hypervolume),
        ("gower scalar vs batch", _selftest_gower),
    ]
    failed = False
    for name, check in checks:
        ok = check(rng)
        print(f"selftest {name}: {'ok' if ok else 'FAIL'}")
        failed |= not ok
    return EXIT_ERROR if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recourse",
        description="Model-agnostic counterfactual explanation engine",
    )
    parser.add_argument("--version", action="version", version=f"recourse {__version__}")
    sub = parser.add_subparsers(dest="command")

    gen = sub.add_parser("generate", help="search counterfactuals for one query point")
    gen.add_argument("--method", choices=METHOD_CHOICES)
    gen.add_argument("--data", help="CSV file")
    gen.add_argument("--schema", help="JSON sidecar schema")
    gen.add_argument("--predictor", help="builtin:... or exec:<command>")
    gen.add_argument("--x-interest", dest="x_interest", help="row index or JSON value array")
    gen.add_argument("--desired-class", dest="desired_class")
    gen.add_argument("--desired-range", dest="desired_range", help="lo,hi")
    gen.add_argument("--config", help="method config JSON file")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", default="recourse-out")
    gen.add_argument("--show-diff", action="store_true")
    gen.add_argument("--no-svg", action="store_true")

    ev = sub.add_parser("evaluate", help="re-score a stored counterfactual set")
    ev.add_argument("--result", help="counterfactuals.json produced by generate")
    ev.add_argument("--data")
    ev.add_argument("--schema")
    ev.add_argument("--predictor")
    ev.add_argument("--measures", help=f"comma list of measures")
    ev.add_argument("--show-diff", action="store_true")
    ev.add_argument("--out", default="recourse-out")

    bench = sub.add_parser("benchmark", help="run the method comparison harness")
    bench.add_argument("--spec", help="benchmark spec JSON")
    bench.add_argument("--out", default="recourse-bench")
    bench.add_argument("--seed", type=int)
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--no-svg", action="store_true")

    sub.add_parser("selftest", help="run bundled oracle checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    handlers = {
        "generate": cmd_generate,
        "evaluate": cmd_evaluate,
        "benchmark": cmd_benchmark,
        "selftest": cmd_selftest,
    }
    try:
        return handlers[args.command](args, parser)
    except RecourseError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
