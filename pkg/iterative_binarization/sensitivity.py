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

"""Sensitivity pre-training.

One probe network is trained per weight-bearing layer with only that layer binarized.
Layers are ranked by the probes' validation errors: the ascending order binarizes the
least sensitive layer first.
"""

import logging
import os

import yaml

from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization import schedule
from iterative_binarization.binarize import BinarizationState
from iterative_binarization.engine import Network
from iterative_binarization.schema import (
    OptimizerSpec,
    ProbeResult,
    SensitivityReport,
    TrainPlan,
)

default_logger = logging.getLogger(__name__)

FAILED_PROBE_ERROR = 1.0


def _probe_error(records, selection):
    if selection == constants.ProbeSelection.LAST:
        return records[-1].val_error
    return min(record.val_error for record in records)


def run_probe(
    network_spec,
    layer,
    probe_epochs,
    lr_grid,
    seed,
    data,
    optimizer=None,
    batch_size=100,
    lr_milestones=(),
    selection=constants.ProbeSelection.BEST,
    cfg=None,
    logger=None,
):
    """Train a fresh network with only `layer` binarized, once per lr in lr_grid.

    :return: ProbeResult with the lowest validation error over the grid. A probe whose
        every grid point diverged is marked failed with error 1.0.
    """
    logger = logger or default_logger
    num_layers = network_spec.num_weight_layers
    if not 1 <= layer <= num_layers:
        raise exc.ConfigurationError(f"Probe layer must be in [1, {num_layers}], got {layer}")
    if probe_epochs < 1:
        raise exc.ConfigurationError(f"Probe epochs must be >= 1, got {probe_epochs}")
    selection = constants.ProbeSelection(selection)
    optimizer = optimizer or OptimizerSpec()
    state = BinarizationState.onehot(num_layers, layer)

    candidates = []
    for lr in lr_grid:
        logger.info(f"Probe layer {layer}/{num_layers}: lr {lr}, seed {seed}")
        plan = TrainPlan(
            order=None,
            epochs_per_layer=0,
            total_epochs=probe_epochs,
            lr0=lr,
            lr_milestones=lr_milestones,
            optimizer=optimizer,
            batch_size=batch_size,
            seed=seed,
        )
        net = Network(network_spec, seed=seed)
        trainer = schedule.Trainer(net, plan, data, cfg=cfg, logger=logger)
        result = trainer.run(lambda epoch: state, restrict_to_fully_binarized=False)
        if not result.completed or not result.records:
            logger.warning(f"Probe layer {layer} diverged at lr {lr}")
            continue
        candidates.append((lr, [_probe_error(result.records, selection)]))

    best_lr = schedule.select_learning_rate(candidates)
    if best_lr is None:
        logger.error(f"Every probe of layer {layer} diverged; ranking it last")
        return ProbeResult(layer=layer, val_error=FAILED_PROBE_ERROR, seed=seed, failed=True)

    val_error = dict(candidates)[best_lr][0]
    logger.info(f"Probe layer {layer}: best val error {val_error:.4f} at lr {best_lr}")
    return ProbeResult(layer=layer, val_error=val_error, lr=best_lr, seed=seed)


def build_report(probe_results, num_layers=None, network=None):
    """Rank probe results; raises ConfigurationError when a layer has no probe."""
    probe_results = list(probe_results)
    num_layers = num_layers or len(probe_results)
    by_layer = {result.layer: result for result in probe_results}
    missing = [layer for layer in range(1, num_layers + 1) if layer not in by_layer]
    if missing or len(by_layer) != len(probe_results) or len(by_layer) != num_layers:
        raise exc.ConfigurationError(
            f"Sensitivity report needs exactly one probe per layer 1..{num_layers}, "
            f"missing {missing}, got layers {sorted(r.layer for r in probe_results)}"
        )
    return SensitivityReport(network=network, entries=[by_layer[k] for k in sorted(by_layer)])


def probe_seeds_for(experiment):
    """One seed per layer: the explicit list, or the first experiment seed shared by all."""
    num_layers = experiment.network_spec.num_weight_layers
    if experiment.probe_seeds is not None:
        return list(experiment.probe_seeds)
    return [experiment.seeds[0]] * num_layers


def write_report(report, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(report.to_dict(), fh, sort_keys=False)


def load_report(path):
    if not os.path.isfile(path):
        raise exc.ConfigurationError(f"Sensitivity report not found: {path}")
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise exc.ConfigurationError(f"Invalid sensitivity report {path}: {e}")
    if not isinstance(data, dict):
        raise exc.ConfigurationError(f"Invalid sensitivity report {path}")
    return SensitivityReport.parse(data)
