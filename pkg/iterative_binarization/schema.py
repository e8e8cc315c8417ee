# (c) 2024, iterative-binarization contributors
#
# This file is part of iterative-binarization.
#
# iterative-binarization is free software: you can redistribute it and/or modify
# it under the terms of the Apache License as published by
# the Apache Software Foundation, either version 2 of the License, or
# (at your option) any later version.
#
# iterative-binarization is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# Apache License for more details.

import math

import attr

from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization.binarize import BinarizationState


def config_error(msg):
    raise exc.ConfigurationError(msg) from None


def _positive_int(instance, attribute, value):
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        config_error(f"'{attribute.name}' must be a positive integer, got {value!r}")


def _non_negative_int(instance, attribute, value):
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        config_error(f"'{attribute.name}' must be a non-negative integer, got {value!r}")


def _positive_float(instance, attribute, value):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
        config_error(f"'{attribute.name}' must be a positive number, got {value!r}")


def _to_tuple(val):
    if val is None:
        return None
    return tuple(val)


def format_order(order):
    """Order as a compact string, '132' means layer 1, then layer 3, then layer 2."""
    if order is None:
        return constants.FLOAT_ORDER_NAME
    sep = "" if all(layer < 10 for layer in order) else "-"
    return sep.join(str(layer) for layer in order)


def parse_order(value):
    """Inverse of format_order for strings; lists pass through."""
    if value is None or value == constants.FLOAT_ORDER_NAME:
        return None
    if isinstance(value, str):
        parts = value.split("-") if "-" in value else list(value)
        try:
            return tuple(int(p) for p in parts)
        except ValueError:
            config_error(f"Invalid order string: '{value}'")
    return tuple(int(v) for v in value)


def check_permutation(order, num_layers=None):
    """Raise ConfigurationError unless order is a permutation of 1..L."""
    num_layers = len(order) if num_layers is None else num_layers
    if len(order) != num_layers or sorted(order) != list(range(1, num_layers + 1)):
        config_error(
            f"Order {list(order)} is not a permutation of layers 1..{num_layers}"
        )


# Layer specs


@attr.s(frozen=True)
class DenseSpec:
    kind = "dense"
    has_weights = True

    in_features = attr.ib(validator=_positive_int)
    out_features = attr.ib(validator=_positive_int)

    @property
    def weight_shape(self):
        return (self.out_features, self.in_features)

    @property
    def fan_in(self):
        return self.in_features

    def output_shape(self, input_shape):
        if tuple(input_shape) != (self.in_features,):
            config_error(f"Dense expects input shape ({self.in_features},), got {input_shape}")
        return (self.out_features,)


@attr.s(frozen=True)
class Conv2dSpec:
    kind = "conv2d"
    has_weights = True

    in_channels = attr.ib(validator=_positive_int)
    out_channels = attr.ib(validator=_positive_int)
    kernel = attr.ib(validator=_positive_int)
    stride = attr.ib(default=1, validator=_positive_int)
    pad = attr.ib(default=0, validator=_non_negative_int)

    @property
    def weight_shape(self):
        return (self.out_channels, self.in_channels, self.kernel, self.kernel)

    @property
    def fan_in(self):
        return self.in_channels * self.kernel * self.kernel

    def spatial_output(self, size):
        span = size + 2 * self.pad - self.kernel
        if span < 0 or span % self.stride:
            config_error(
                f"Conv2d output size ({size} + 2*{self.pad} - {self.kernel})/{self.stride} + 1 "
                "is not a positive integer"
            )
        return span // self.stride + 1

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            config_error(
                f"Conv2d expects input shape ({self.in_channels}, h, w), got {input_shape}"
            )
        _, height, width = input_shape
        return (self.out_channels, self.spatial_output(height), self.spatial_output(width))


@attr.s(frozen=True)
class BatchNormSpec:
    kind = "batchnorm"
    has_weights = False

    features = attr.ib(validator=_positive_int)

    def output_shape(self, input_shape):
        if not input_shape or input_shape[0] != self.features:
            config_error(f"BatchNorm expects {self.features} features, got shape {input_shape}")
        return tuple(input_shape)


@attr.s(frozen=True)
class ReLUSpec:
    kind = "relu"
    has_weights = False

    def output_shape(self, input_shape):
        return tuple(input_shape)


@attr.s(frozen=True)
class FlattenSpec:
    kind = "flatten"
    has_weights = False

    def output_shape(self, input_shape):
        return (math.prod(input_shape),)


LAYER_SPEC_KINDS = {
    cls.kind: cls for cls in (DenseSpec, Conv2dSpec, BatchNormSpec, ReLUSpec, FlattenSpec)
}


def parse_layer_spec(data):
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in LAYER_SPEC_KINDS:
        config_error(f"Unknown layer kind: {kind!r}")
    try:
        return LAYER_SPEC_KINDS[kind](**data)
    except TypeError as e:
        config_error(f"Invalid {kind} layer: {e}")


def layer_spec_to_dict(spec):
    return {"kind": spec.kind, **attr.asdict(spec)}


@attr.s(frozen=True)
class NetworkSpec:
    """Declarative sequential network; adjacent layer shapes must compose."""

    name = attr.ib()
    input_shape = attr.ib(converter=tuple)
    layers = attr.ib(converter=tuple)

    def __attrs_post_init__(self):
        if not self.layers:
            config_error("Network needs at least one layer")
        if not any(layer.has_weights for layer in self.layers):
            config_error("Network needs at least one weight-bearing layer")
        # Raises on the first layer whose input does not match
        self.shapes()

    def shapes(self):
        """Output shape of every layer, per example."""
        shape = self.input_shape
        result = []
        for layer in self.layers:
            shape = layer.output_shape(shape)
            result.append(shape)
        return result

    @property
    def output_shape(self):
        return self.shapes()[-1]

    @property
    def weight_layers(self):
        return [layer for layer in self.layers if layer.has_weights]

    @property
    def num_weight_layers(self):
        return len(self.weight_layers)

    @property
    def weight_count(self):
        return sum(math.prod(layer.weight_shape) for layer in self.weight_layers)

    @classmethod
    def from_preset(cls, name):
        if name not in constants.NETWORK_PRESETS:
            config_error(
                f"Unknown network '{name}', expected one of {sorted(constants.NETWORK_PRESETS)}"
            )
        preset = constants.NETWORK_PRESETS[name]
        return cls.parse({"name": name, **preset})

    @classmethod
    def parse(cls, data):
        return cls(
            name=data.get("name", "custom"),
            input_shape=data["input_shape"],
            layers=[parse_layer_spec(layer) for layer in data["layers"]],
        )

    def to_dict(self):
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "layers": [layer_spec_to_dict(layer) for layer in self.layers],
        }


# Training


def _default_weight_decay(spec):
    if spec.kind == constants.OptimizerKind.SGD:
        return constants.SGD_WEIGHT_DECAY
    return 0.0


@attr.s(frozen=True)
class OptimizerSpec:
    kind = attr.ib(default=constants.OptimizerKind.ADAM, converter=constants.OptimizerKind)
    beta1 = attr.ib(default=constants.ADAM_BETA1)
    beta2 = attr.ib(default=constants.ADAM_BETA2)
    eps = attr.ib(default=constants.ADAM_EPS)
    momentum = attr.ib(default=constants.SGD_MOMENTUM)
    weight_decay = attr.ib(default=attr.Factory(_default_weight_decay, takes_self=True))

    @classmethod
    def parse(cls, data):
        if isinstance(data, str):
            return cls(kind=data)
        return cls(**data)

    def to_dict(self):
        data = attr.asdict(self)
        data["kind"] = self.kind.value
        return data


def _convert_milestones(val):
    return tuple((int(epoch), float(factor)) for epoch, factor in (val or ()))


def _check_milestones(instance, attribute, value):
    epochs = [epoch for epoch, _ in value]
    if any(later <= earlier for earlier, later in zip(epochs, epochs[1:])):
        config_error(f"'{attribute.name}' epochs must be strictly increasing: {epochs}")
    if any(epoch < 1 for epoch in epochs):
        config_error(f"'{attribute.name}' epochs must be >= 1: {epochs}")
    if any(not factor > 0 for _, factor in value):
        config_error(f"'{attribute.name}' factors must be > 0")


@attr.s(frozen=True)
class TrainPlan:
    """Binarization order, epochs per layer N, total epochs T and optimization settings.

    order is a 1-based permutation of the weight-bearing layers, or None for training
    that never binarizes (the float baseline). epochs_per_layer=0 flags every layer
    before the first epoch (the binary baseline).
    """

    order = attr.ib(converter=_to_tuple)
    epochs_per_layer = attr.ib(validator=_non_negative_int)
    total_epochs = attr.ib(validator=_positive_int)
    lr0 = attr.ib(validator=_positive_float)
    lr_milestones = attr.ib(factory=tuple, converter=_convert_milestones,
                            validator=_check_milestones)
    optimizer = attr.ib(factory=OptimizerSpec)
    batch_size = attr.ib(default=100, validator=_positive_int)
    seed = attr.ib(default=0)

    @order.validator
    def _check_order(self, attribute, value):
        if value is not None:
            check_permutation(value)

    def __attrs_post_init__(self):
        if self.order is not None:
            needed = len(self.order) * self.epochs_per_layer
            if self.total_epochs < needed:
                config_error(
                    f"Total epochs {self.total_epochs} is less than layers * epochs per layer "
                    f"({needed})"
                )

    @property
    def order_name(self):
        return format_order(self.order)

    def to_dict(self):
        return {
            "order": None if self.order is None else list(self.order),
            "epochs_per_layer": self.epochs_per_layer,
            "total_epochs": self.total_epochs,
            "lr0": self.lr0,
            "lr_milestones": [list(m) for m in self.lr_milestones],
            "optimizer": self.optimizer.to_dict(),
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


def _check_error_rate(instance, attribute, value):
    if not 0.0 <= value <= 1.0:
        config_error(f"'{attribute.name}' must be in [0, 1], got {value}")


@attr.s(frozen=True)
class MetricsRecord:
    epoch = attr.ib()
    train_error = attr.ib(validator=_check_error_rate)
    val_error = attr.ib(validator=_check_error_rate)
    test_error = attr.ib(validator=_check_error_rate)
    lr = attr.ib()
    state = attr.ib(type=BinarizationState)
    wall_time = attr.ib(default=0.0)

    def to_row(self):
        return [
            self.epoch,
            repr(float(self.train_error)),
            repr(float(self.val_error)),
            repr(float(self.test_error)),
            repr(float(self.lr)),
            self.state.bitstring,
        ]

    @classmethod
    def from_row(cls, row):
        return cls(
            epoch=int(row["epoch"]),
            train_error=float(row["train_error"]),
            val_error=float(row["val_error"]),
            test_error=float(row["test_error"]),
            lr=float(row["lr"]),
            state=BinarizationState.from_bitstring(row["binarized_layers"]),
        )


# Sensitivity


@attr.s(frozen=True)
class ProbeResult:
    layer = attr.ib(validator=_positive_int)
    val_error = attr.ib(converter=float)
    lr = attr.ib(default=None)
    seed = attr.ib(default=0)
    failed = attr.ib(default=False)


@attr.s(frozen=True)
class SensitivityReport:
    """One probe per weight-bearing layer, ranked by best validation error."""

    network = attr.ib()
    entries = attr.ib(converter=tuple)

    @entries.validator
    def _check_entries(self, attribute, value):
        layers = sorted(entry.layer for entry in value)
        if layers != list(range(1, len(value) + 1)):
            config_error(f"Sensitivity report needs one probe per layer, got layers {layers}")

    @property
    def num_layers(self):
        return len(self.entries)

    @property
    def ascending_order(self):
        ranked = sorted(self.entries, key=lambda entry: (entry.val_error, entry.layer))
        return tuple(entry.layer for entry in ranked)

    @property
    def descending_order(self):
        return tuple(reversed(self.ascending_order))

    def to_dict(self):
        return {
            "network": self.network,
            "probes": [
                {
                    "layer": entry.layer,
                    "val_error": entry.val_error,
                    "lr": entry.lr,
                    "seed": entry.seed,
                    "failed": entry.failed,
                }
                for entry in sorted(self.entries, key=lambda entry: entry.layer)
            ],
            "ascending_order": format_order(self.ascending_order),
            "descending_order": format_order(self.descending_order),
        }

    @classmethod
    def parse(cls, data):
        try:
            entries = [ProbeResult(**probe) for probe in data["probes"]]
            return cls(network=data.get("network"), entries=entries)
        except (KeyError, TypeError) as e:
            config_error(f"Invalid sensitivity report: {e}")


# Experiments


def _check_lr_grid(instance, attribute, value):
    if not value:
        config_error("'lr_grid' must contain at least one learning rate")
    for lr in value:
        _positive_float(instance, attribute, lr)


def _check_seeds(instance, attribute, value):
    if not value:
        config_error("'seeds' must contain at least one seed")
    if len(set(value)) != len(value):
        config_error(f"'seeds' must be unique: {list(value)}")


def _convert_floats(val):
    return tuple(float(v) for v in val)


def _to_case(val):
    try:
        return constants.Case(val)
    except ValueError:
        config_error(f"Unknown case {val!r}, expected one of {[c.value for c in constants.Case]}")


def _convert_ints(val):
    if val is None:
        return None
    return tuple(int(v) for v in val)


@attr.s(frozen=True)
class ExperimentConfig:
    """A declarative experiment: one network, one case, a seed list and an lr grid."""

    network = attr.ib()
    case = attr.ib(converter=_to_case)
    epochs_per_layer = attr.ib(validator=_non_negative_int)
    total_epochs = attr.ib(validator=_positive_int)
    batch_size = attr.ib(validator=_positive_int)
    optimizer = attr.ib(type=OptimizerSpec)
    probe_epochs = attr.ib(validator=_positive_int)
    order = attr.ib(default=None, converter=parse_order)
    lr_grid = attr.ib(default=constants.DEFAULT_LR_GRID, converter=_convert_floats,
                      validator=_check_lr_grid)
    lr_milestones = attr.ib(factory=tuple, converter=_convert_milestones,
                            validator=_check_milestones)
    seeds = attr.ib(default=(0,), converter=_convert_ints, validator=_check_seeds)
    random_order_seed = attr.ib(default=0)
    sensitivity_report = attr.ib(default=None)
    probe_seeds = attr.ib(default=None, converter=_convert_ints)
    probe_lr_milestones = attr.ib(factory=tuple, converter=_convert_milestones,
                                  validator=_check_milestones)
    data_dir = attr.ib(default=None)
    output_dir = attr.ib(default=None)

    @network.validator
    def _check_network(self, attribute, value):
        if value not in constants.NETWORK_PRESETS:
            config_error(
                f"Unknown network '{value}', expected one of {sorted(constants.NETWORK_PRESETS)}"
            )

    @case.validator
    def _check_case(self, attribute, value):
        if value == constants.Case.EXPLICIT and self.order is None:
            config_error("Case 'explicit' requires an 'order'")
        if value.needs_report and not self.sensitivity_report:
            config_error(f"Case '{value.value}' requires a 'sensitivity_report' path")

    @order.validator
    def _check_order(self, attribute, value):
        if value is not None:
            check_permutation(value, self.network_spec.num_weight_layers)

    @probe_seeds.validator
    def _check_probe_seeds(self, attribute, value):
        if value is not None and len(value) != self.network_spec.num_weight_layers:
            config_error(
                f"'probe_seeds' needs one seed per layer ({self.network_spec.num_weight_layers})"
            )

    def __attrs_post_init__(self):
        needed = self.network_spec.num_weight_layers * self.epochs_per_layer
        if self.case != constants.Case.FLOAT and self.total_epochs < needed:
            config_error(
                f"Total epochs {self.total_epochs} is less than layers * epochs per layer "
                f"({needed})"
            )

    @property
    def network_spec(self):
        return NetworkSpec.from_preset(self.network)

    @classmethod
    def parse(cls, data):
        """Build from a mapping, filling unset fields with the network's preset defaults."""
        data = dict(data or {})
        network = data.get("network")
        if network not in constants.NETWORK_PRESETS:
            config_error(
                f"Unknown network {network!r}, expected one of "
                f"{sorted(constants.NETWORK_PRESETS)}"
            )
        for key, value in constants.NETWORK_PRESETS[network]["defaults"].items():
            data.setdefault(key, value)
        data.setdefault("case", constants.Case.FORWARD.value)
        data["optimizer"] = OptimizerSpec.parse(data["optimizer"])

        unknown = set(data) - {a.name for a in attr.fields(cls)}
        if unknown:
            config_error(f"Unknown experiment config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return {
            "network": self.network,
            "case": self.case.value,
            "order": None if self.order is None else format_order(self.order),
            "epochs_per_layer": self.epochs_per_layer,
            "total_epochs": self.total_epochs,
            "batch_size": self.batch_size,
            "optimizer": self.optimizer.to_dict(),
            "probe_epochs": self.probe_epochs,
            "lr_grid": list(self.lr_grid),
            "lr_milestones": [list(m) for m in self.lr_milestones],
            "seeds": list(self.seeds),
            "random_order_seed": self.random_order_seed,
            "sensitivity_report": self.sensitivity_report,
            "probe_seeds": None if self.probe_seeds is None else list(self.probe_seeds),
            "probe_lr_milestones": [list(m) for m in self.probe_lr_milestones],
            "data_dir": self.data_dir,
            "output_dir": self.output_dir,
        }


@attr.s(frozen=True)
class RunSummary:
    """Outcome of one (case, order, seed, lr) run, stored as summary.yaml."""

    network = attr.ib()
    case = attr.ib()
    order = attr.ib()
    seed = attr.ib()
    lr = attr.ib()
    digest = attr.ib()
    status = attr.ib(default=constants.RUN_STATUS_COMPLETED)
    best_epoch = attr.ib(default=None)
    val_error = attr.ib(default=None)
    test_error = attr.ib(default=None)
    diagnostic = attr.ib(default=None)
    diverged_epoch = attr.ib(default=None)
    wall_time = attr.ib(default=0.0)
    checkpoint_sha256 = attr.ib(default=None)

    @property
    def completed(self):
        return self.status == constants.RUN_STATUS_COMPLETED

    def to_dict(self):
        return attr.asdict(self)

    @classmethod
    def parse(cls, data):
        return cls(**data)


@attr.s(frozen=True)
class CaseAggregate:
    network = attr.ib()
    case = attr.ib()
    lr = attr.ib()
    mean_test_error = attr.ib()
    std_test_error = attr.ib()
    n_seeds = attr.ib()
    curve_epochs = attr.ib(factory=tuple, converter=tuple)
    curve_mean = attr.ib(factory=tuple, converter=tuple)
    curve_std = attr.ib(factory=tuple, converter=tuple)


@attr.s(frozen=True)
class AggregateResult:
    """Per-case aggregates for one or two networks, plus cross-network improvements."""

    cases = attr.ib(factory=tuple, converter=tuple)
    improvements = attr.ib(factory=tuple, converter=tuple)

    def get(self, network, case):
        for aggregate in self.cases:
            if aggregate.network == network and aggregate.case == case:
                return aggregate
        return None
