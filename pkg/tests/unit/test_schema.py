import re

import pytest

from iterative_binarization import exceptions as exc
from iterative_binarization.binarize import BinarizationState
from iterative_binarization.constants import Case, OptimizerKind
from iterative_binarization.schema import (
    ExperimentConfig,
    MetricsRecord,
    NetworkSpec,
    OptimizerSpec,
    TrainPlan,
    format_order,
    parse_order,
)


def test_preset_networks():
    small = NetworkSpec.from_preset("300-100-10")
    assert small.num_weight_layers == 3
    assert small.output_shape == (10,)
    big = NetworkSpec.from_preset("784-784-10")
    assert big.weight_count == 784 * 784 * 2 + 784 * 10
    conv = NetworkSpec.from_preset("conv-small")
    assert conv.shapes()[3] == (8, 14, 14)


def test_unknown_preset():
    with pytest.raises(exc.ConfigurationError, match="Unknown network 'lenet'"):
        NetworkSpec.from_preset("lenet")


def test_network_spec_round_trip():
    spec = NetworkSpec.from_preset("conv-small")
    assert NetworkSpec.parse(spec.to_dict()) == spec


def test_network_shapes_must_compose():
    data = {
        "input_shape": [8],
        "layers": [
            {"kind": "dense", "in_features": 8, "out_features": 4},
            {"kind": "dense", "in_features": 5, "out_features": 2},
        ],
    }
    with pytest.raises(exc.ConfigurationError, match=re.escape("input shape (5,)")):
        NetworkSpec.parse(data)


def test_network_needs_weight_layer():
    with pytest.raises(exc.ConfigurationError, match="weight-bearing"):
        NetworkSpec.parse({"input_shape": [4], "layers": [{"kind": "relu"}]})


@pytest.mark.parametrize(
    "layer",
    [
        {"kind": "pool"},
        {"kind": "dense", "in_features": 4},
        {"kind": "dense", "in_features": 0, "out_features": 2},
    ],
)
def test_bad_layer_specs(layer):
    with pytest.raises(exc.ConfigurationError):
        NetworkSpec.parse({"input_shape": [4], "layers": [layer]})


def test_format_and_parse_order():
    assert format_order((1, 3, 2)) == "132"
    assert format_order(None) == "none"
    assert format_order((10, 1, 2, 3, 4, 5, 6, 7, 8, 9)).startswith("10-1-2")
    assert parse_order("231") == (2, 3, 1)
    assert parse_order("10-1-2") == (10, 1, 2)
    assert parse_order([3, 1, 2]) == (3, 1, 2)
    assert parse_order("none") is None
    with pytest.raises(exc.ConfigurationError):
        parse_order("1a3")


def test_train_plan_checks():
    TrainPlan(order=(2, 1, 3), epochs_per_layer=150, total_epochs=450, lr0=1e-3)
    with pytest.raises(exc.ConfigurationError, match="less than layers"):
        TrainPlan(order=(2, 1, 3), epochs_per_layer=150, total_epochs=449, lr0=1e-3)
    with pytest.raises(exc.ConfigurationError, match="permutation"):
        TrainPlan(order=(1, 1, 3), epochs_per_layer=1, total_epochs=3, lr0=1e-3)
    with pytest.raises(exc.ConfigurationError, match="lr0"):
        TrainPlan(order=None, epochs_per_layer=0, total_epochs=3, lr0=0)
    with pytest.raises(exc.ConfigurationError, match="strictly increasing"):
        TrainPlan(
            order=None,
            epochs_per_layer=0,
            total_epochs=3,
            lr0=1,
            lr_milestones=[(5, 0.1), (5, 0.1)],
        )


def test_float_plan_ignores_epoch_budget():
    plan = TrainPlan(order=None, epochs_per_layer=150, total_epochs=3, lr0=1e-3)
    assert plan.order_name == "none"


def test_optimizer_spec():
    assert OptimizerSpec.parse("adam").weight_decay == 0.0
    sgd = OptimizerSpec.parse({"kind": "sgd", "momentum": 0.8})
    assert sgd.kind == OptimizerKind.SGD
    assert sgd.weight_decay == 1e-4
    assert sgd.to_dict()["kind"] == "sgd"


def test_metrics_record_row():
    record = MetricsRecord(
        epoch=3,
        train_error=0.25,
        val_error=0.5,
        test_error=0.125,
        lr=0.001,
        state=BinarizationState.from_bitstring("110"),
    )
    row = record.to_row()
    assert row == [3, "0.25", "0.5", "0.125", "0.001", "110"]
    keys = ["epoch", "train_error", "val_error", "test_error", "lr", "binarized_layers"]
    assert MetricsRecord.from_row(dict(zip(keys, [str(v) for v in row]))) == record


def test_metrics_record_rejects_bad_error_rate():
    with pytest.raises(exc.ConfigurationError, match="val_error"):
        MetricsRecord(
            epoch=1, train_error=0.1, val_error=1.5, test_error=0.1, lr=0.1,
            state=BinarizationState.zeros(1),
        )


def test_experiment_defaults_from_preset():
    experiment = ExperimentConfig.parse({"network": "300-100-10"})
    assert experiment.case == Case.FORWARD
    assert experiment.epochs_per_layer == 150
    assert experiment.total_epochs == 450
    assert experiment.batch_size == 100
    assert experiment.optimizer.kind == OptimizerKind.ADAM
    assert experiment.lr_grid == (3e-4, 1e-3, 3e-3)
    assert experiment.seeds == (0,)


def test_conv_preset_uses_sgd_grid():
    experiment = ExperimentConfig.parse({"network": "conv-small"})
    assert experiment.optimizer.kind == OptimizerKind.SGD
    assert experiment.lr_grid == (0.01, 0.03, 0.1)
    assert ExperimentConfig.parse({"network": "conv-small", "lr_grid": [0.5]}).lr_grid == (0.5,)


def test_experiment_round_trip():
    experiment = ExperimentConfig.parse(
        {
            "network": "300-100-10",
            "case": "explicit",
            "order": "312",
            "seeds": [1, 2, 3],
            "lr_grid": [0.001],
            "lr_milestones": [[300, 0.1]],
        }
    )
    assert experiment.order == (3, 1, 2)
    assert ExperimentConfig.parse(experiment.to_dict()) == experiment


@pytest.mark.parametrize(
    ("data", "match"),
    [
        ({"network": "lenet"}, "Unknown network"),
        ({"network": "300-100-10", "colour": "red"}, "Unknown experiment config keys"),
        ({"network": "300-100-10", "case": "explicit"}, "requires an 'order'"),
        ({"network": "300-100-10", "case": "ascending"}, "sensitivity_report"),
        ({"network": "300-100-10", "order": "1234"}, "permutation"),
        ({"network": "300-100-10", "seeds": [1, 1]}, "unique"),
        ({"network": "300-100-10", "lr_grid": []}, "at least one"),
        ({"network": "300-100-10", "probe_seeds": [1]}, "one seed per layer"),
        ({"network": "300-100-10", "total_epochs": 100}, "less than layers"),
    ],
)
def test_experiment_validation(data, match):
    with pytest.raises(exc.ConfigurationError, match=match):
        ExperimentConfig.parse(data)


def test_experiment_bad_case():
    with pytest.raises(exc.ConfigurationError, match="Unknown case 'sideways'"):
        ExperimentConfig.parse({"network": "300-100-10", "case": "sideways"})


def test_float_case_skips_epoch_budget():
    experiment = ExperimentConfig.parse(
        {"network": "300-100-10", "case": "float", "total_epochs": 10}
    )
    assert experiment.total_epochs == 10
