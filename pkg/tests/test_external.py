import sys
from pathlib import Path

import pytest

from recourse import FeatureDescriptor, FeatureSchema, ProtocolError, spawn_external_predictor

CHILD = Path(__file__).parent / "fixtures" / "predictor_child.py"


def child_command(mode: str) -> list[str]:
    return [sys.executable, str(CHILD), mode]


def one_d_schema():
    return FeatureSchema((FeatureDescriptor("x1", "numeric"),))


def test_constant_child_scores_half():
    with spawn_external_predictor(child_command("const"), one_d_schema(), "regression") as f:
        scores = f.predict_batch([(0.1,), (0.9,), (0.4,)])
    assert scores[:, 0].tolist() == [0.5, 0.5, 0.5]


def test_linear_child_round_trip():
    with spawn_external_predictor(child_command("linear"), one_d_schema(), "regression") as f:
        scores = f.predict_batch([(0.2,), (0.9,)])
    assert scores[:, 0].tolist() == [0.2, 0.9]


def test_classification_child_announces_classes():
    with spawn_external_predictor(child_command("classif"), one_d_schema(), "classification") as f:
        assert f.class_labels == ("no", "yes")
        scores = f.predict_batch([(0.25,)])
    assert scores[0].tolist() == [0.75, 0.25]


def test_categorical_values_travel_as_strings():
    schema = FeatureSchema(
        (
            FeatureDescriptor("x1", "numeric"),
            FeatureDescriptor("c", "categorical", levels=("a", "b")),
        )
    )
    with spawn_external_predictor(child_command("linear"), schema, "regression") as f:
        scores = f.predict_batch([(0.5, "a")])
    assert scores[0, 0] == 0.5


def test_wrong_length_response():
    with spawn_external_predictor(child_command("wrong-length"), one_d_schema(), "regression") as f:
        with pytest.raises(ProtocolError) as err:
            f.predict_batch([(0.1,), (0.2,)])
    assert err.value.code == "protocol-wrong-length"


def test_malformed_response_line():
    with spawn_external_predictor(child_command("malformed"), one_d_schema(), "regression") as f:
        with pytest.raises(ProtocolError) as err:
            f.predict_batch([(0.1,)])
    assert err.value.code == "protocol-malformed-line"


def test_child_early_exit():
    with spawn_external_predictor(child_command("early-exit"), one_d_schema(), "regression") as f:
        with pytest.raises(ProtocolError) as err:
            f.predict_batch([(0.1,)])
    assert err.value.code == "protocol-exit"


def test_bad_handshake():
    with pytest.raises(ProtocolError) as err:
        spawn_external_predictor(child_command("bad-handshake"), one_d_schema(), "regression")
    assert err.value.code == "protocol-handshake"


def test_regression_child_must_not_announce_classes():
    with pytest.raises(ProtocolError) as err:
        spawn_external_predictor(child_command("classif"), one_d_schema(), "regression")
    assert err.value.code == "protocol-handshake"


def test_missing_command():
    with pytest.raises(ProtocolError) as err:
        spawn_external_predictor(["/nonexistent-predictor-binary"], one_d_schema(), "regression")
    assert err.value.code == "protocol-exit"


def test_batches_are_chunked():
    with spawn_external_predictor(
        child_command("linear"), one_d_schema(), "regression", batch_cap=3
    ) as f:
        batch = [(float(i),) for i in range(10)]
        scores = f.predict_batch(batch)
    assert scores[:, 0].tolist() == [float(i) for i in range(10)]
