"""Multi-objective evolutionary counterfactual search.

A customized NSGA-II over mixed feature spaces: four initialization
strategies, uniform crossover, scaled Gaussian / uniform-discrete mutation
with a sparsity-inducing reset step, optional feasibility-first survival, and
termination on a generation budget or hypervolume stagnation. The search
returns every unique nondominated individual seen across all generations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .distances import DistanceFunction, get_distance
from .errors import ConfigError, SearchError
from .objectives import (
    ObjectiveVector,
    PlausibilityConfig,
    evaluate_objectives_batch,
    o_valid,
)
from .pareto import (
    crowding_distance,
    crowding_order,
    hypervolume,
    nondominated_indices,
    nondominated_sort,
)
from .predict import PredictionCache, PredictionFunction
from .results import CounterfactualSet
from .schema import Dataset, DesiredTarget, Instance

INIT_STRATEGIES = ("random", "sd", "traindata", "icecurve")
TERMINATIONS = ("generations", "genstag")
HV_STAGNATION_TOL = 1e-12
ICE_GRID_SIZE = 20


@dataclass
class MocConfig:
    """Control parameters of the evolutionary search.

    ``n_generations`` is the generation budget under ``termination=
    "generations"`` and the stagnation window under ``"genstag"``; in the
    latter mode ``max_generations`` caps the loop unconditionally.
    """

    mu: int = 20
    n_generations: int = 175
    p_rec: float = 0.71
    p_rec_gen: float = 0.62
    p_mut: float = 0.73
    p_mut_gen: float = 0.5
    p_mut_use_orig: float = 0.4
    k: int = 1
    weights: tuple[float, ...] | None = None
    epsilon: float | None = None
    fixed_features: tuple[str, ...] = ()
    max_changed: int | None = None
    lower: dict[str, float] | None = None
    upper: dict[str, float] | None = None
    init_strategy: str = "icecurve"
    termination: str = "generations"
    max_generations: int = 500
    distance_function: str = "gower"
    seed: int = 0

    def __post_init__(self):
        if self.mu < 2:
            raise ConfigError("population size mu must be >= 2")
        for name in ("p_rec", "p_rec_gen", "p_mut", "p_mut_gen", "p_mut_use_orig"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be a probability, got {v!r}")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ConfigError(f"unknown init_strategy {self.init_strategy!r}")
        if self.termination not in TERMINATIONS:
            raise ConfigError(f"unknown termination {self.termination!r}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.max_changed is not None and self.max_changed < 0:
            raise ConfigError("max_changed must be >= 0")
        if isinstance(self.fixed_features, list):
            self.fixed_features = tuple(self.fixed_features)
        if isinstance(self.weights, list):
            self.weights = tuple(self.weights)

    @classmethod
    def from_dict(cls, d: dict) -> "MocConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown MOC config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["fixed_features"] = list(self.fixed_features)
        out["weights"] = list(self.weights) if self.weights is not None else None
        return out


@dataclass
class Individual:
    instance: Instance
    objectives: ObjectiveVector
    violation: float
    generation_born: int
    rank: int = 0
    crowding: float = 0.0


@dataclass
class GenerationStats:
    generation: int
    mean: tuple[float, float, float, float]
    minimum: tuple[float, float, float, float]
    hv: float
    objectives: list[tuple[float, float, float, float]]


@dataclass
class GenerationLog:
    ref_point: tuple[float, float, float, float]
    entries: list[GenerationStats] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Shared gene helpers


def _numeric_bounds(data: Dataset, cfg: MocConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per numeric column: user override where given, else observed min/max."""
    lower = data.numeric_mins.copy()
    upper = data.numeric_maxs.copy()
    schema = data.schema
    for name, value in (cfg.lower or {}).items():
        j = schema.index_of(name)
        if j not in schema.numeric_position:
            raise ConfigError(f"lower bound on non-numeric feature {name!r}")
        lower[schema.numeric_position[j]] = value
    for name, value in (cfg.upper or {}).items():
        j = schema.index_of(name)
        if j not in schema.numeric_position:
            raise ConfigError(f"upper bound on non-numeric feature {name!r}")
        upper[schema.numeric_position[j]] = value
    if (lower > upper).any():
        raise ConfigError("lower bound exceeds upper bound")
    return lower, upper


def _conform_numeric(v: float, lo: float, hi: float, integer_valued: bool) -> float:
    v = min(max(v, lo), hi)
    if integer_valued:
        v = float(round(v))
        v = min(max(v, lo), hi)
    return v


def _conform(
    values: list,
    x_interest: Instance,
    data: Dataset,
    cfg: MocConfig,
    rng: np.random.Generator,
    fixed: frozenset[int],
    lower: np.ndarray,
    upper: np.ndarray,
) -> Instance:
    """Force hard constraints: fixed features, bounds, integrality, max_changed."""
    schema = data.schema
    for j in fixed:
        values[j] = x_interest[j]
    for j, desc in enumerate(schema.features):
        if desc.is_numeric:
            c = schema.numeric_position[j]
            values[j] = _conform_numeric(float(values[j]), lower[c], upper[c], desc.integer_valued)
    if cfg.max_changed is not None:
        changed = [j for j in range(schema.p) if values[j] != x_interest[j]]
        while len(changed) > cfg.max_changed:
            pick = int(rng.integers(len(changed)))
            j = changed.pop(pick)
            values[j] = x_interest[j]
    return tuple(values)


def _sample_uniform(
    rng: np.random.Generator,
    data: Dataset,
    lower: np.ndarray,
    upper: np.ndarray,
) -> list:
    schema = data.schema
    values: list = []
    for j, desc in enumerate(schema.features):
        if desc.is_numeric:
            c = schema.numeric_position[j]
            v = float(rng.uniform(lower[c], upper[c]))
            values.append(_conform_numeric(v, lower[c], upper[c], desc.integer_valued))
        else:
            values.append(desc.levels[int(rng.integers(len(desc.levels)))])
    return values


# ---------------------------------------------------------------------------
# Operators


def ice_importance(
    x_interest: Instance,
    f: PredictionFunction,
    data: Dataset,
    feature: int | str,
    target: DesiredTarget,
    grid_size: int = ICE_GRID_SIZE,
) -> float:
    """Feature importance as the spread of the prediction curve at one point.

    Sweeps the feature over an equidistant grid of its observed range (all
    levels for categorical features) while holding everything else at
    *x_interest*, and returns the population standard deviation of the scores.
    """
    schema = data.schema
    j = schema.index_of(feature) if isinstance(feature, str) else feature
    desc = schema.features[j]
    if desc.is_numeric:
        c = schema.numeric_position[j]
        grid = np.linspace(data.numeric_mins[c], data.numeric_maxs[c], grid_size)
        sweep = [tuple(v if i != j else float(g) for i, v in enumerate(x_interest)) for g in grid]
    else:
        sweep = [tuple(v if i != j else lv for i, v in enumerate(x_interest)) for lv in desc.levels]
    scores = f.scalar_scores(sweep, target)
    return float(np.std(scores))


def initialize_population(
    strategy: str,
    x_interest: Instance,
    data: Dataset,
    f: PredictionFunction,
    target: DesiredTarget,
    cfg: MocConfig,
    rng: np.random.Generator | None = None,
) -> list[Instance]:
    """Draw the initial population and apply the strategy's reset rule.

    Every strategy ends by resetting features to their value in *x_interest*:
    uniformly with probability ``p_mut_use_orig`` for random/sd/traindata, and
    with importance-scaled probabilities for icecurve (the most important
    feature is never reset). Fixed features always carry *x_interest* values.
    """
    if strategy not in INIT_STRATEGIES:
        raise ConfigError(f"unknown init strategy {strategy!r}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    schema = data.schema
    fixed = schema.fixed_indices(cfg.fixed_features)
    lower, upper = _numeric_bounds(data, cfg)
    sds = data.numeric_sds

    reset_probs = np.full(schema.p, cfg.p_mut_use_orig)
    if strategy == "icecurve":
        importances = np.array(
            [ice_importance(x_interest, f, data, j, target) for j in range(schema.p)]
        )
        top = importances.max()
        if top > 0:
            reset_probs = 1.0 - importances / top
        # all-zero importances: keep the uniform default

    seeds: list[list] = []
    if strategy == "traindata":
        from .objectives import o_plaus_batch, o_sparse
        from .distances import get_distance as _get

        dist = _get(cfg.distance_function)
        prox = np.asarray(dist(data.rows, [x_interest], data))[:, 0]
        plaus = o_plaus_batch(
            data.rows, data, PlausibilityConfig(cfg.k, cfg.weights), dist
        )
        objs3 = [
            (float(prox[i]), float(o_sparse(data.rows[i], x_interest)), float(plaus[i]))
            for i in range(data.n)
        ]
        nd = nondominated_indices(objs3)
        if len(nd) >= cfg.mu:
            chosen = rng.choice(len(nd), size=cfg.mu, replace=False)
            seeds = [list(data.rows[nd[int(i)]]) for i in chosen]
        else:
            seeds = [list(data.rows[i]) for i in nd]

    population: list[Instance] = []
    for _ in range(cfg.mu):
        if seeds:
            values = seeds.pop(0)
        elif strategy == "sd":
            values = []
            for j, desc in enumerate(schema.features):
                if desc.is_numeric:
                    c = schema.numeric_position[j]
                    lo = max(lower[c], float(x_interest[j]) - sds[c])
                    hi = min(upper[c], float(x_interest[j]) + sds[c])
                    if lo > hi:  # interest point outside the sampling box
                        lo = hi = min(max(float(x_interest[j]), lower[c]), upper[c])
                    v = float(rng.uniform(lo, hi))
                    values.append(_conform_numeric(v, lower[c], upper[c], desc.integer_valued))
                else:
                    values.append(desc.levels[int(rng.integers(len(desc.levels)))])
        else:
            values = _sample_uniform(rng, data, lower, upper)
        for j in range(schema.p):
            if j in fixed:
                continue
            if rng.random() < reset_probs[j]:
                values[j] = x_interest[j]
        population.append(_conform(values, x_interest, data, cfg, rng, fixed, lower, upper))
    return population


def recombine(
    parents: tuple[Instance, Instance],
    data: Dataset,
    cfg: MocConfig,
    rng: np.random.Generator,
) -> tuple[Instance, Instance]:
    """Uniform crossover: with probability ``p_rec`` swap each non-fixed gene
    independently with probability ``p_rec_gen``; otherwise copy the parents."""
    a, b = list(parents[0]), list(parents[1])
    if rng.random() < cfg.p_rec:
        fixed = data.schema.fixed_indices(cfg.fixed_features)
        for j in range(data.schema.p):
            if j in fixed:
                continue
            if rng.random() < cfg.p_rec_gen:
                a[j], b[j] = b[j], a[j]
    return tuple(a), tuple(b)


def mutate(
    inst: Instance,
    x_interest: Instance,
    data: Dataset,
    cfg: MocConfig,
    rng: np.random.Generator,
) -> Instance:
    """Scaled Gaussian / uniform-discrete mutation followed by a sparsity reset.

    A non-selected individual (probability ``1 - p_mut``) passes through
    untouched. Numeric genes move by N(0, sd_j) and clamp to the active
    bounds; categorical genes jump uniformly to another level. Each gene then
    resets to its *x_interest* value with probability ``p_mut_use_orig``.
    """
    if rng.random() >= cfg.p_mut:
        return tuple(inst)
    schema = data.schema
    fixed = schema.fixed_indices(cfg.fixed_features)
    lower, upper = _numeric_bounds(data, cfg)
    sds = data.numeric_sds
    values = list(inst)
    for j, desc in enumerate(schema.features):
        if j in fixed:
            continue
        if rng.random() < cfg.p_mut_gen:
            if desc.is_numeric:
                c = schema.numeric_position[j]
                v = float(values[j]) + float(rng.normal(0.0, sds[c]))
                values[j] = _conform_numeric(v, lower[c], upper[c], desc.integer_valued)
            else:
                others = [lv for lv in desc.levels if lv != values[j]]
                if others:
                    values[j] = others[int(rng.integers(len(others)))]
    for j in range(schema.p):
        if j in fixed:
            continue
        if rng.random() < cfg.p_mut_use_orig:
            values[j] = x_interest[j]
    return tuple(values)


# ---------------------------------------------------------------------------
# Search loop


def _tournament(pop: list[Individual], rng: np.random.Generator) -> Individual:
    i = int(rng.integers(len(pop)))
    j = int(rng.integers(len(pop)))
    a, b = pop[i], pop[j]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return pop[min(i, j)]


def _assign_fronts_and_crowding(
    individuals: list[Individual],
    data: Dataset,
    dist: DistanceFunction,
    use_constraints: bool,
) -> list[list[int]]:
    objs = [ind.objectives.as_tuple() for ind in individuals]
    viols = [ind.violation for ind in individuals] if use_constraints else None
    fronts = nondominated_sort(objs, viols)
    for rank, front in enumerate(fronts):
        scores = crowding_distance(
            [objs[i] for i in front],
            [individuals[i].instance for i in front],
            data,
            dist,
        )
        for i, s in zip(front, scores):
            individuals[i].rank = rank
            individuals[i].crowding = float(s)
    return fronts


def _survival(
    individuals: list[Individual],
    mu: int,
    data: Dataset,
    dist: DistanceFunction,
    use_constraints: bool,
) -> list[Individual]:
    fronts = _assign_fronts_and_crowding(individuals, data, dist, use_constraints)
    survivors: list[Individual] = []
    for front in fronts:
        members = [individuals[i] for i in front]
        order = crowding_order(np.array([m.crowding for m in members]))
        if len(survivors) + len(members) <= mu:
            survivors.extend(members[i] for i in order)
        else:
            survivors.extend(members[i] for i in order[: mu - len(survivors)])
        if len(survivors) >= mu:
            break
    return survivors


def find_counterfactuals_moc(
    f: PredictionFunction,
    x_interest: Instance,
    target: DesiredTarget,
    data: Dataset,
    cfg: MocConfig | None = None,
) -> tuple[CounterfactualSet, GenerationLog]:
    """Run the evolutionary search and collect nondominated counterfactuals.

    Returns the counterfactual set together with the per-generation log
    (objective statistics, hypervolume, and population snapshots).
    """
    cfg = cfg or MocConfig()
    rng = np.random.default_rng(cfg.seed)
    schema = data.schema
    if len(x_interest) != schema.p:
        raise SearchError("query instance does not match the schema")
    x_interest = tuple(x_interest)

    cache = PredictionCache(f)
    dist = get_distance(cfg.distance_function)
    plaus_cfg = PlausibilityConfig(cfg.k, cfg.weights)
    fixed = schema.fixed_indices(cfg.fixed_features)
    lower, upper = _numeric_bounds(data, cfg)
    use_constraints = cfg.epsilon is not None

    interest_score = float(cache.scalar_scores([x_interest], target)[0])
    ref_point = (o_valid(interest_score, target), 1.0, float(schema.p), 1.0)
    log = GenerationLog(ref_point=ref_point)

    def evaluate(instances: list[Instance], born: int) -> list[Individual]:
        vectors = evaluate_objectives_batch(
            instances, x_interest, cache, target, data, plaus_cfg, dist
        )
        out = []
        for inst, vec in zip(instances, vectors):
            viol = max(0.0, vec.o_valid - cfg.epsilon) if use_constraints else 0.0
            out.append(Individual(inst, vec, viol, born))
        return out

    def log_generation(generation: int, pop: list[Individual]) -> float:
        snapshot = [ind.objectives.as_tuple() for ind in pop]
        arr = np.asarray(snapshot)
        hv = hypervolume(snapshot, ref_point)
        log.entries.append(
            GenerationStats(
                generation=generation,
                mean=tuple(float(v) for v in arr.mean(axis=0)),
                minimum=tuple(float(v) for v in arr.min(axis=0)),
                hv=hv,
                objectives=snapshot,
            )
        )
        return hv

    population = evaluate(
        initialize_population(cfg.init_strategy, x_interest, data, cache, target, cfg, rng),
        born=0,
    )
    _assign_fronts_and_crowding(population, data, dist, use_constraints)

    archive: dict[Instance, Individual] = {}
    for ind in population:
        archive.setdefault(ind.instance, ind)

    best_hv = log_generation(0, population)
    stall = 0
    generation = 0
    terminated_by = "generations"
    while True:
        if cfg.termination == "generations":
            if generation >= cfg.n_generations:
                break
        else:
            if stall >= cfg.n_generations:
                terminated_by = "hv-stagnation"
                break
            if generation >= cfg.max_generations:
                terminated_by = "max-generations"
                break

        offspring_values: list[Instance] = []
        while len(offspring_values) < cfg.mu:
            p1 = _tournament(population, rng)
            p2 = _tournament(population, rng)
            c1, c2 = recombine((p1.instance, p2.instance), data, cfg, rng)
            for child in (c1, c2):
                mutated = mutate(child, x_interest, data, cfg, rng)
                offspring_values.append(
                    _conform(list(mutated), x_interest, data, cfg, rng, fixed, lower, upper)
                )
        offspring = evaluate(offspring_values[: cfg.mu], born=generation + 1)

        population = _survival(
            population + offspring, cfg.mu, data, dist, use_constraints
        )
        for ind in population:
            archive.setdefault(ind.instance, ind)

        generation += 1
        hv = log_generation(generation, population)
        if hv > best_hv + HV_STAGNATION_TOL:
            best_hv = hv
            stall = 0
        else:
            stall += 1

    candidates = [ind for inst, ind in archive.items() if inst != x_interest]
    if candidates:
        objs = [ind.objectives.as_tuple() for ind in candidates]
        viols = [ind.violation for ind in candidates] if use_constraints else None
        keep = nondominated_indices(objs, viols)
        final = [candidates[i] for i in keep]
    else:
        final = []

    diagnostics = {
        "generations_run": generation,
        "terminated_by": terminated_by,
        "predictor_cache_hits": cache.hits,
        "predictor_cache_misses": cache.misses,
    }
    if use_constraints:
        feasible_seen = any(ind.violation <= 0.0 for ind in archive.values())
        diagnostics["all_infeasible"] = not feasible_seen

    result = CounterfactualSet(
        x_interest=x_interest,
        target=target,
        method="moc",
        counterfactuals=tuple(ind.instance for ind in final),
        schema=schema,
        provenance={
            "config": cfg.to_dict(),
            "seed": cfg.seed,
            "distance_function": cfg.distance_function,
        },
        diagnostics=diagnostics,
    )
    return result, log


# ---------------------------------------------------------------------------
# Diagnostics over the generation log

_OBJECTIVE_COLUMNS = {
    "o_valid": 0,
    "o_prox": 1,
    "o_sparse": 2,
    "o_plaus": 3,
    "dist_target": 0,
    "dist_x_interest": 1,
    "no_changed": 2,
    "dist_train": 3,
}

OBJECTIVE_NAMES = ("o_valid", "o_prox", "o_sparse", "o_plaus")


def moc_statistics(log: GenerationLog, scaled: bool = False) -> list[dict]:
    """Per-generation objective statistics plus population and archive HV.

    ``scaled=True`` min-max scales each mean/min series to [0, 1] across
    generations (flat series map to 0).
    """
    rows: list[dict] = []
    front: list[tuple[float, float, float, float]] = []
    for entry in log.entries:
        merged = front + entry.objectives
        keep = nondominated_indices(merged)
        seen: set[tuple] = set()
        front = []
        for i in keep:
            if merged[i] not in seen:
                seen.add(merged[i])
                front.append(merged[i])
        row: dict = {"generation": entry.generation}
        for name, c in zip(OBJECTIVE_NAMES, range(4)):
            row[f"mean_{name}"] = entry.mean[c]
            row[f"min_{name}"] = entry.minimum[c]
        row["hv"] = entry.hv
        row["hv_archive"] = hypervolume(front, log.ref_point)
        rows.append(row)
    if scaled and rows:
        for key in [k for k in rows[0] if k.startswith(("mean_", "min_"))]:
            values = np.array([r[key] for r in rows])
            span = values.max() - values.min()
            scaled_vals = (values - values.min()) / span if span > 0 else np.zeros(len(values))
            for r, v in zip(rows, scaled_vals):
                r[key] = float(v)
    return rows


def moc_search_trace(
    log: GenerationLog, objectives: tuple[str, str] = ("o_prox", "o_valid")
) -> list[dict]:
    """Flatten population snapshots to (obj_a, obj_b, generation) triples."""
    for name in objectives:
        if name not in _OBJECTIVE_COLUMNS:
            raise ConfigError(f"unknown objective {name!r}")
    a, b = (_OBJECTIVE_COLUMNS[n] for n in objectives)
    rows = []
    for entry in log.entries:
        for vec in entry.objectives:
            rows.append({objectives[0]: vec[a], objectives[1]: vec[b], "generation": entry.generation})
    return rows
