import math

import numpy as np
import pytest

from recourse import (
    Dataset,
    DesiredTarget,
    FeatureDescriptor,
    FeatureSchema,
    MocConfig,
    find_counterfactuals_moc,
    ice_importance,
    initialize_population,
    moc_search_trace,
    moc_statistics,
    mutate,
    recombine,
)
from recourse.moc import GenerationLog
from recourse.predict import PredictionFunction

from conftest import (
    identity_regressor,
    make_mixed_dataset,
    make_numeric_dataset,
    sigmoid_classifier,
)
from oracles import dominates_direct


def one_d_data(n=80, seed=0):
    return make_numeric_dataset(n=n, p=1, seed=seed)


ANY_TARGET = DesiredTarget((0.6, 1.0))


class TestInitialization:
    def test_all_fixed_random_strategy_copies_x(self, mixed_data):
        cfg = MocConfig(mu=8, fixed_features=("x1", "x2", "color"), seed=3)
        x = mixed_data.rows[0]
        pop = initialize_population(
            "random", x, mixed_data, sigmoid_classifier(), DesiredTarget((0.6, 1), "yes"), cfg
        )
        assert len(pop) == 8
        assert all(ind == x for ind in pop)

    def test_sd_strategy_stays_within_one_sd(self):
        data = one_d_data(n=50, seed=2)
        values = [r[0] for r in data.rows]
        mean = sum(values) / len(values)
        sigma = math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))
        x = (0.5,)
        cfg = MocConfig(mu=40, p_mut_use_orig=0.0, seed=9)
        pop = initialize_population("sd", x, data, identity_regressor(), ANY_TARGET, cfg)
        for ind in pop:
            assert x[0] - sigma - 1e-12 <= ind[0] <= x[0] + sigma + 1e-12

    def test_traindata_fills_remainder_randomly(self):
        # x_interest coincides with one training row, which dominates all
        # others on the three search-space objectives, so the nondominated
        # pool is a singleton and the rest must come from uniform sampling.
        data = one_d_data(n=30, seed=4)
        x = data.rows[7]
        cfg = MocConfig(mu=10, p_mut_use_orig=0.0, seed=5)
        pop = initialize_population("traindata", x, data, identity_regressor(), ANY_TARGET, cfg)
        assert len(pop) == 10
        assert any(ind == x for ind in pop)
        assert not all(ind == x for ind in pop)

    def test_traindata_draws_from_pool_when_large_enough(self):
        schema = FeatureSchema((FeatureDescriptor("a", "numeric"),))
        rows = [(1.0,)] * 15
        data = Dataset(schema, rows)
        cfg = MocConfig(mu=10, p_mut_use_orig=0.0, seed=1)
        pop = initialize_population("traindata", (1.0,), data, identity_regressor(), ANY_TARGET, cfg)
        assert all(ind == (1.0,) for ind in pop)

    def test_icecurve_never_resets_most_important_feature(self):
        data = make_numeric_dataset(n=60, p=2, seed=6)
        x = (0.3, 0.3)
        cfg = MocConfig(mu=30, seed=12)
        pop = initialize_population("icecurve", x, data, identity_regressor(), ANY_TARGET, cfg)
        # x1 drives the predictor, x2 is ignored: x2 must reset (probability 1)
        assert all(ind[1] == x[1] for ind in pop)
        assert any(ind[0] != x[0] for ind in pop)

    def test_unknown_strategy_rejected(self, mixed_data):
        with pytest.raises(Exception, match="init"):
            initialize_population(
                "nope", mixed_data.rows[0], mixed_data, sigmoid_classifier(), ANY_TARGET, MocConfig()
            )


class TestIceImportance:
    def test_constant_predictor_scores_zero(self, mixed_data):
        def fn(batch):
            return np.full((len(batch), 1), 0.7)

        f = PredictionFunction(fn, "regression")
        for j in range(3):
            got = ice_importance(mixed_data.rows[0], f, mixed_data, j, ANY_TARGET)
            assert got == pytest.approx(0.0, abs=1e-12)

    def test_linear_predictor_matches_grid_sd(self):
        data = one_d_data(n=40, seed=1)
        lo = min(r[0] for r in data.rows)
        hi = max(r[0] for r in data.rows)
        grid = [lo + i * (hi - lo) / 19 for i in range(20)]
        mean = sum(grid) / 20
        want = math.sqrt(sum((g - mean) ** 2 for g in grid) / 20)
        got = ice_importance((0.5,), identity_regressor(), data, 0, ANY_TARGET)
        assert got == pytest.approx(want, abs=1e-12)

    def test_unused_feature_scores_zero(self):
        data = make_numeric_dataset(n=40, p=2, seed=3)
        got = ice_importance((0.5, 0.5), identity_regressor(), data, 1, ANY_TARGET)
        assert got == 0.0

    def test_categorical_sweeps_levels(self, mixed_data):
        def fn(batch):
            return np.array([[1.0 if b[2] == "red" else 0.0] for b in batch])

        f = PredictionFunction(fn, "regression")
        got = ice_importance(mixed_data.rows[0], f, mixed_data, "color", ANY_TARGET)
        values = [1.0, 0.0, 0.0]
        mean = sum(values) / 3
        want = math.sqrt(sum((v - mean) ** 2 for v in values) / 3)
        assert got == pytest.approx(want, abs=1e-12)


class TestRecombine:
    def test_no_recombination_copies_parents(self, mixed_data):
        cfg = MocConfig(p_rec=0.0, seed=0)
        rng = np.random.default_rng(0)
        a, b = mixed_data.rows[0], mixed_data.rows[1]
        assert recombine((a, b), mixed_data, cfg, rng) == (a, b)

    def test_certain_recombination_swaps_everything(self, mixed_data):
        cfg = MocConfig(p_rec=1.0, p_rec_gen=1.0, seed=0)
        rng = np.random.default_rng(0)
        a, b = mixed_data.rows[0], mixed_data.rows[1]
        assert recombine((a, b), mixed_data, cfg, rng) == (b, a)

    def test_fixed_features_never_swap(self, mixed_data):
        cfg = MocConfig(p_rec=1.0, p_rec_gen=1.0, fixed_features=("color",), seed=0)
        rng = np.random.default_rng(0)
        a, b = mixed_data.rows[0], mixed_data.rows[1]
        c1, c2 = recombine((a, b), mixed_data, cfg, rng)
        assert c1[2] == a[2] and c2[2] == b[2]
        assert c1[:2] == b[:2] and c2[:2] == a[:2]

    def test_per_gene_swap_frequency(self, mixed_data):
        cfg = MocConfig(p_rec=1.0, p_rec_gen=0.5, seed=0)
        rng = np.random.default_rng(99)
        a, b = (0.0, -1.0, "red"), (1.0, 1.0, "green")  # distinct everywhere
        swaps = np.zeros(3)
        trials = 1000
        for _ in range(trials):
            c1, _ = recombine((a, b), mixed_data, cfg, rng)
            swaps += [c1[j] == b[j] for j in range(3)]
        for freq in swaps / trials:
            assert 0.45 <= freq <= 0.55


class TestMutate:
    def test_unselected_individual_is_identity(self, mixed_data):
        cfg = MocConfig(p_mut=0.0, seed=0)
        rng = np.random.default_rng(0)
        x = mixed_data.rows[0]
        assert mutate(mixed_data.rows[1], x, mixed_data, cfg, rng) == mixed_data.rows[1]

    def test_two_level_categorical_flips(self):
        schema = FeatureSchema(
            (
                FeatureDescriptor("a", "numeric"),
                FeatureDescriptor("c", "categorical", levels=("x", "y")),
            )
        )
        data = Dataset(schema, [(0.0, "x"), (1.0, "y")])
        cfg = MocConfig(p_mut=1.0, p_mut_gen=1.0, p_mut_use_orig=0.0, seed=0)
        rng = np.random.default_rng(0)
        mutated = mutate((0.5, "x"), (0.5, "x"), data, cfg, rng)
        assert mutated[1] == "y"

    def test_values_clamp_to_bounds(self):
        data = one_d_data(n=30, seed=8)
        hi = max(r[0] for r in data.rows)
        lo = min(r[0] for r in data.rows)
        cfg = MocConfig(p_mut=1.0, p_mut_gen=1.0, p_mut_use_orig=0.0, seed=0)
        hit_upper = False
        for seed in range(60):
            rng = np.random.default_rng(seed)
            out = mutate((hi,), (hi,), data, cfg, rng)
            assert lo <= out[0] <= hi
            hit_upper |= out[0] == hi
        assert hit_upper  # positive perturbations must clamp exactly to the bound

    def test_integer_features_stay_integral(self):
        schema = FeatureSchema((FeatureDescriptor("n", "numeric", integer_valued=True),))
        data = Dataset(schema, [(float(v),) for v in range(10)])
        cfg = MocConfig(p_mut=1.0, p_mut_gen=1.0, p_mut_use_orig=0.0, seed=0)
        for seed in range(30):
            rng = np.random.default_rng(seed)
            out = mutate((4.0,), (4.0,), data, cfg, rng)
            assert out[0] == int(out[0])

    def test_fixed_features_never_mutate(self, mixed_data):
        cfg = MocConfig(
            p_mut=1.0, p_mut_gen=1.0, p_mut_use_orig=0.0, fixed_features=("x1", "color"), seed=0
        )
        x = mixed_data.rows[0]
        rng = np.random.default_rng(1)
        out = mutate(x, x, mixed_data, cfg, rng)
        assert out[0] == x[0] and out[2] == x[2]


class TestSearch:
    def analytic_setup(self, seed=1):
        data = one_d_data(n=80, seed=0)
        cfg = MocConfig(mu=20, termination="genstag", n_generations=10, seed=seed)
        return data, identity_regressor(), (0.3,), DesiredTarget((0.6, 1.0)), cfg

    def test_analytic_predictor_finds_valid_counterfactual(self):
        data, f, x, target, cfg = self.analytic_setup(seed=1)
        result, log = find_counterfactuals_moc(f, x, target, data, cfg)
        assert len(result) >= 1
        assert any(0.6 <= cf[0] <= 1.0 for cf in result.counterfactuals)

    def test_all_features_fixed_returns_empty(self, mixed_data):
        cfg = MocConfig(
            mu=4, n_generations=2, fixed_features=("x1", "x2", "color"), seed=0
        )
        result, _ = find_counterfactuals_moc(
            sigmoid_classifier(), mixed_data.rows[0], DesiredTarget((0.9, 1.0), "yes"), mixed_data, cfg
        )
        assert len(result) == 0

    def test_result_is_mutually_nondominated(self):
        data, f, x, target, cfg = self.analytic_setup(seed=3)
        result, _ = find_counterfactuals_moc(f, x, target, data, cfg)
        from recourse.objectives import evaluate_objectives_batch

        vecs = [
            v.as_tuple()
            for v in evaluate_objectives_batch(list(result.counterfactuals), x, f, target, data)
        ]
        for i in range(len(vecs)):
            for j in range(len(vecs)):
                if i != j:
                    assert not dominates_direct(vecs[i], vecs[j])

    def test_duplicate_free_and_excludes_x_interest(self):
        data, f, x, target, cfg = self.analytic_setup(seed=4)
        result, _ = find_counterfactuals_moc(f, x, target, data, cfg)
        assert len(set(result.counterfactuals)) == len(result.counterfactuals)
        assert x not in result.counterfactuals

    def test_seeded_determinism(self):
        data, f, x, target, cfg = self.analytic_setup(seed=7)
        r1, log1 = find_counterfactuals_moc(f, x, target, data, cfg)
        r2, log2 = find_counterfactuals_moc(f, x, target, data, cfg)
        assert r1.counterfactuals == r2.counterfactuals
        assert [e.objectives for e in log1.entries] == [e.objectives for e in log2.entries]

    def test_population_size_is_mu_every_generation(self):
        data, f, x, target, cfg = self.analytic_setup(seed=5)
        _, log = find_counterfactuals_moc(f, x, target, data, cfg)
        assert all(len(e.objectives) == cfg.mu for e in log.entries)

    def test_constraints_respected(self):
        data = make_mixed_dataset(n=100, seed=10)
        cfg = MocConfig(
            mu=12,
            n_generations=8,
            fixed_features=("color",),
            max_changed=1,
            lower={"x1": 0.2},
            upper={"x1": 0.8},
            seed=11,
        )
        x = (0.25, 0.0, "red")
        result, _ = find_counterfactuals_moc(
            sigmoid_classifier(), x, DesiredTarget((0.6, 1.0), "yes"), data, cfg
        )
        for cf in result.counterfactuals:
            assert cf[2] == "red"
            assert 0.2 <= cf[0] <= 0.8
            assert sum(1 for a, b in zip(cf, x) if a != b) <= 1

    def test_epsilon_filters_infeasible_results(self):
        data, f, x, target, _ = self.analytic_setup()
        cfg = MocConfig(mu=20, termination="genstag", n_generations=10, epsilon=0.0, seed=2)
        result, log = find_counterfactuals_moc(f, x, target, data, cfg)
        feasible_seen = any(
            vec[0] == 0.0 for entry in log.entries for vec in entry.objectives
        )
        assert feasible_seen
        assert result.diagnostics["all_infeasible"] is False
        scores = [cf[0] for cf in result.counterfactuals]
        assert all(0.6 <= s <= 1.0 for s in scores)

    def test_generation_budget_termination(self):
        data, f, x, target, _ = self.analytic_setup()
        cfg = MocConfig(mu=6, n_generations=3, seed=0)
        _, log = find_counterfactuals_moc(f, x, target, data, cfg)
        assert [e.generation for e in log.entries] == [0, 1, 2, 3]


class TestDiagnostics:
    def run_short(self, n_generations=0):
        data = one_d_data(n=40, seed=0)
        cfg = MocConfig(mu=6, n_generations=n_generations, seed=0)
        return find_counterfactuals_moc(
            identity_regressor(), (0.3,), DesiredTarget((0.6, 1.0)), data, cfg
        )

    def test_zero_generation_run_logs_single_row(self):
        _, log = self.run_short(0)
        rows = moc_statistics(log)
        assert len(rows) == 1

    def test_archive_hv_is_nondecreasing(self):
        _, log = self.run_short(12)
        rows = moc_statistics(log)
        archive = [r["hv_archive"] for r in rows]
        assert all(b >= a - 1e-12 for a, b in zip(archive, archive[1:]))

    def test_scaled_statistics_in_unit_interval(self):
        _, log = self.run_short(10)
        for row in moc_statistics(log, scaled=True):
            for key, value in row.items():
                if key.startswith(("mean_", "min_")):
                    assert 0.0 <= value <= 1.0

    def test_search_trace_empty_log(self):
        log = GenerationLog(ref_point=(1.0, 1.0, 1.0, 1.0))
        assert moc_search_trace(log) == []

    def test_search_trace_counts_and_replay(self):
        _, log = self.run_short(6)
        trace = moc_search_trace(log, ("o_prox", "o_valid"))
        assert len(trace) == sum(len(e.objectives) for e in log.entries)
        flat = [
            (vec[1], vec[0], e.generation) for e in log.entries for vec in e.objectives
        ]
        assert [(r["o_prox"], r["o_valid"], r["generation"]) for r in trace] == flat

    def test_measure_aliases_accepted(self):
        _, log = self.run_short(2)
        trace = moc_search_trace(log, ("dist_x_interest", "dist_target"))
        assert trace and set(trace[0]) == {"dist_x_interest", "dist_target", "generation"}
