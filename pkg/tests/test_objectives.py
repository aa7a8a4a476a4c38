import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recourse import (
    Dataset,
    DesiredTarget,
    FeatureDescriptor,
    FeatureSchema,
    PlausibilityConfig,
    evaluate_objectives,
    gower_distance,
    l0_matrix,
    o_plaus,
    o_sparse,
    o_valid,
)
from recourse.distances import get_distance, gower_matrix, gower_matrix_fast, register_distance
from recourse.objectives import o_valid_batch

from conftest import COLORS, make_mixed_dataset, sigmoid_classifier
from oracles import gower_scalar, l0_pairs, o_plaus_direct, o_valid_direct


def kinds_and_ranges(data):
    kinds = [f.kind for f in data.schema.features]
    return kinds, list(data.ranges_hat)


class TestValidity:
    def test_inside_interval(self):
        assert o_valid(0.7, DesiredTarget((0.6, 1.0))) == 0.0

    def test_below_interval(self):
        assert o_valid(0.5, DesiredTarget((0.6, 1.0))) == pytest.approx(0.1, abs=1e-12)

    def test_above_interval(self):
        assert o_valid(0.9, DesiredTarget((0.0, 0.4))) == pytest.approx(0.5, abs=1e-12)

    @given(
        score=st.floats(-2, 3, allow_nan=False),
        lo=st.floats(0, 1, allow_nan=False),
        width=st.floats(0, 1, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_zero_iff_inside_closed_interval(self, score, lo, width):
        target = DesiredTarget((lo, lo + width))
        assert (o_valid(score, target) == 0.0) == (lo <= score <= lo + width)

    def test_batch_matches_scalar(self):
        target = DesiredTarget((0.25, 0.75))
        scores = np.linspace(-0.5, 1.5, 41)
        batch = o_valid_batch(scores, target)
        for s, v in zip(scores, batch):
            assert v == o_valid(float(s), target)


class TestGower:
    def test_identical_instances(self, mixed_data):
        a = mixed_data.rows[0]
        assert gower_distance(a, a, mixed_data) == 0.0

    def test_single_numeric_feature(self):
        schema = FeatureSchema((FeatureDescriptor("a", "numeric"),))
        data = Dataset(schema, [(0.0,), (40.0,)])
        assert gower_distance((10.0,), (20.0,), data) == pytest.approx(0.25, abs=1e-15)

    def test_numeric_plus_differing_categorical(self):
        schema = FeatureSchema(
            (
                FeatureDescriptor("a", "numeric"),
                FeatureDescriptor("c", "categorical", levels=("x", "y")),
            )
        )
        data = Dataset(schema, [(0.0, "x"), (1.0, "y")])
        # numeric term 0.5, categorical mismatch 1 -> (0.5 + 1) / 2
        assert gower_distance((0.25, "x"), (0.75, "y"), data) == pytest.approx(0.75, abs=1e-15)

    def test_zero_range_feature_counts_mismatch(self):
        schema = FeatureSchema((FeatureDescriptor("a", "numeric"),))
        data = Dataset(schema, [(2.0,), (2.0,)])
        assert gower_distance((2.0,), (2.0,), data) == 0.0
        assert gower_distance((2.0,), (3.0,), data) == 1.0

    def test_out_of_range_values_allowed(self):
        schema = FeatureSchema((FeatureDescriptor("a", "numeric"),))
        data = Dataset(schema, [(0.0,), (1.0,)])
        assert gower_distance((0.0,), (5.0,), data) == 5.0

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_symmetry(self, seed):
        data = make_mixed_dataset(n=8, seed=seed % 17)
        rng = np.random.default_rng(seed)
        i, j = int(rng.integers(8)), int(rng.integers(8))
        d = gower_matrix([data.rows[i]], [data.rows[j]], data)[0, 0]
        d_t = gower_matrix([data.rows[j]], [data.rows[i]], data)[0, 0]
        assert d == d_t
        assert 0.0 <= d <= 1.0

    def test_batch_matches_scalar_oracle(self):
        data = make_mixed_dataset(n=30, seed=11)
        kinds, ranges = kinds_and_ranges(data)
        xs, ys = list(data.rows[:12]), list(data.rows[12:])
        for impl in (gower_matrix, gower_matrix_fast):
            batch = impl(xs, ys, data)
            for i, a in enumerate(xs):
                for j, b in enumerate(ys):
                    assert batch[i, j] == pytest.approx(
                        gower_scalar(a, b, kinds, ranges), abs=1e-12
                    )

    def test_fast_path_blocks_match(self):
        data = make_mixed_dataset(n=50, seed=7)
        full = gower_matrix(list(data.rows), list(data.rows), data)
        blocked = gower_matrix_fast(list(data.rows), list(data.rows), data, block=16)
        assert np.array_equal(full, blocked)


class TestSparsity:
    def test_identical(self):
        assert o_sparse((1.0, "a"), (1.0, "a")) == 0

    def test_documented_l0_rows(self):
        xt = (0.5, "a")
        yt = [(0.5, "a"), (3.2, "b"), (0.1, "a")]
        assert [o_sparse(xt, y) for y in yt] == [0, 2, 1]

    def test_all_features_differ(self):
        assert o_sparse((0.0, 1.0, "a"), (1.0, 2.0, "b")) == 3


class TestPlausibility:
    def test_training_row_with_k1(self, mixed_data):
        assert o_plaus(mixed_data.rows[3], mixed_data, PlausibilityConfig(k=1)) == 0.0

    def test_two_neighbors_uniform(self):
        schema = FeatureSchema((FeatureDescriptor("a", "numeric"),))
        data = Dataset(schema, [(0.0,), (1.0,)])
        value = o_plaus((0.25,), data, PlausibilityConfig(k=2))
        assert value == pytest.approx(0.5, abs=1e-15)

    def test_degenerate_weights_pick_nearest(self):
        schema = FeatureSchema((FeatureDescriptor("a", "numeric"),))
        data = Dataset(schema, [(0.0,), (1.0,)])
        value = o_plaus((0.25,), data, PlausibilityConfig(k=2, weights=(1.0, 0.0)))
        assert value == pytest.approx(0.25, abs=1e-15)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(Exception, match="sum to 1"):
            PlausibilityConfig(k=2, weights=(0.9, 0.2))

    def test_matches_oracle_with_ties(self):
        data = make_mixed_dataset(n=20, seed=9)
        kinds, ranges = kinds_and_ranges(data)
        for k in (1, 3, 7):
            for i in range(10):
                x = make_mixed_dataset(n=20, seed=100 + i).rows[i]
                got = o_plaus(x, data, PlausibilityConfig(k=k))
                want = o_plaus_direct(x, data.rows, kinds, ranges, k)
                assert got == pytest.approx(want, abs=1e-12)


class TestEvaluateObjectives:
    def test_candidate_equal_to_interest(self):
        data = make_mixed_dataset(n=30, seed=4)
        f = sigmoid_classifier()
        target = DesiredTarget((0.0, 1.0), "yes")  # everything is valid
        x = (0.9, 0.0, "red")
        vec = evaluate_objectives(x, x, f, target, data)
        assert (vec.o_valid, vec.o_prox, vec.o_sparse) == (0.0, 0.0, 0)
        assert vec.o_plaus == pytest.approx(
            o_plaus(x, data, PlausibilityConfig(k=1)), abs=1e-15
        )

    def test_training_row_has_zero_plaus(self):
        data = make_mixed_dataset(n=30, seed=4)
        f = sigmoid_classifier()
        row = data.rows[5]
        target = DesiredTarget((0.0, 1.0), "yes")
        vec = evaluate_objectives(row, data.rows[0], f, target, data)
        assert vec.o_plaus == 0.0

    def test_randomized_against_independent_recomputation(self):
        data = make_mixed_dataset(n=25, seed=21)
        kinds, ranges = kinds_and_ranges(data)
        f = sigmoid_classifier()
        target = DesiredTarget((0.6, 1.0), "yes")
        rng = np.random.default_rng(2)
        for _ in range(30):
            x = (
                float(rng.uniform(0, 1)),
                float(rng.uniform(-2, 2)),
                COLORS[int(rng.integers(3))],
            )
            x_star = data.rows[int(rng.integers(data.n))]
            vec = evaluate_objectives(x, x_star, f, target, data, PlausibilityConfig(k=2))
            score = 1.0 / (1.0 + np.exp(-(4.0 * x[0] - 2.0)))
            assert vec.o_valid == pytest.approx(o_valid_direct(score, 0.6, 1.0), abs=1e-12)
            assert vec.o_prox == pytest.approx(gower_scalar(x, x_star, kinds, ranges), abs=1e-12)
            assert vec.o_sparse == sum(1 for a, b in zip(x, x_star) if a != b)
            assert vec.o_plaus == pytest.approx(
                o_plaus_direct(x, data.rows, kinds, ranges, 2), abs=1e-12
            )


class TestL0Registry:
    def test_documented_matrix(self):
        xt = [(0.5, "a")]
        yt = [(0.5, "a"), (3.2, "b"), (0.1, "a")]
        assert l0_matrix(xt, yt).tolist() == [[0.0, 2.0, 1.0]]

    def test_zero_diagonal(self, mixed_data):
        batch = list(mixed_data.rows[:6])
        m = l0_matrix(batch, batch, mixed_data)
        assert np.diagonal(m).tolist() == [0.0] * 6

    def test_matches_nested_loop_oracle(self, mixed_data):
        xs, ys = list(mixed_data.rows[:2]), list(mixed_data.rows[2:5])
        assert l0_matrix(xs, ys, mixed_data).tolist() == l0_pairs(xs, ys)

    def test_registry_names(self):
        assert get_distance("l0") is l0_matrix
        for name in ("gower", "gower_fast", "l0"):
            get_distance(name)

    def test_user_registration(self, mixed_data):
        def everything_far(xs, ys, data):
            return np.full((len(xs), len(ys)), 9.0)

        register_distance("far", everything_far)
        assert get_distance("far")([(1,)], [(2,)], mixed_data)[0, 0] == 9.0
