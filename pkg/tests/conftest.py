import numpy as np
import pytest

from recourse import Dataset, DesiredTarget, FeatureDescriptor, FeatureSchema
from recourse.predict import PredictionFunction

COLORS = ("red", "green", "blue")


def mixed_schema() -> FeatureSchema:
    return FeatureSchema(
        (
            FeatureDescriptor("x1", "numeric"),
            FeatureDescriptor("x2", "numeric"),
            FeatureDescriptor("color", "categorical", levels=COLORS),
        )
    )


def make_mixed_dataset(n=60, seed=0, outcomes="classification") -> Dataset:
    rng = np.random.default_rng(seed)
    rows = [
        (
            float(rng.uniform(0.0, 1.0)),
            float(rng.uniform(-2.0, 2.0)),
            COLORS[int(rng.integers(3))],
        )
        for _ in range(n)
    ]
    if outcomes == "classification":
        labels = ["yes" if r[0] > 0.5 else "no" for r in rows]
        return Dataset(mixed_schema(), rows, labels, "label", "categorical")
    if outcomes == "regression":
        values = [float(4.0 * r[0] - 2.0 + 0.1 * rng.normal()) for r in rows]
        return Dataset(mixed_schema(), rows, values, "y", "numeric")
    return Dataset(mixed_schema(), rows)


def make_numeric_dataset(n=200, p=2, seed=0, outcomes=None) -> Dataset:
    rng = np.random.default_rng(seed)
    schema = FeatureSchema(
        tuple(FeatureDescriptor(f"x{j + 1}", "numeric") for j in range(p))
    )
    rows = [tuple(float(v) for v in rng.uniform(0.0, 1.0, size=p)) for _ in range(n)]
    outs = None
    kind = None
    name = None
    if outcomes == "classification":
        outs = ["yes" if r[0] > 0.5 else "no" for r in rows]
        kind, name = "categorical", "label"
    elif outcomes == "regression":
        outs = [float(r[0]) for r in rows]
        kind, name = "numeric", "y"
    return Dataset(schema, rows, outs, name, kind)


def sigmoid_classifier() -> PredictionFunction:
    """Analytic classifier: positive-class score sigmoid(4*x1 - 2)."""

    def fn(batch):
        s = np.array([1.0 / (1.0 + np.exp(-(4.0 * float(b[0]) - 2.0))) for b in batch])
        return np.column_stack([1.0 - s, s])

    return PredictionFunction(fn, "classification", ("no", "yes"), name="sigmoid-analytic")


def identity_regressor() -> PredictionFunction:
    """Regression score equal to the first feature."""

    def fn(batch):
        return np.array([[float(b[0])] for b in batch])

    return PredictionFunction(fn, "regression", name="identity")


def table_regressor(table: dict, default: float = 0.0) -> PredictionFunction:
    """Regression scores looked up per exact instance; handy for reward tests."""

    def fn(batch):
        return np.array([[float(table.get(tuple(b), default))] for b in batch])

    return PredictionFunction(fn, "regression", name="table")


@pytest.fixture
def mixed_data() -> Dataset:
    return make_mixed_dataset()


@pytest.fixture
def sigmoid_f() -> PredictionFunction:
    return sigmoid_classifier()


@pytest.fixture
def positive_target() -> DesiredTarget:
    return DesiredTarget((0.6, 1.0), "yes")
