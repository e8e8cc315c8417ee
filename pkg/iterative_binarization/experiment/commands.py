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

import csv
import itertools
import logging
import math
import os

import attr

from iterative_binarization import config
from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization import schedule
from iterative_binarization import sensitivity
from iterative_binarization.experiment import report
from iterative_binarization.experiment import storage
from iterative_binarization.experiment.jobs import ProbeJob, TrainJob
from iterative_binarization.experiment.runners import get_runner
from iterative_binarization.loaders import MnistLoader
from iterative_binarization.schema import ExperimentConfig, TrainPlan, format_order

default_logger = logging.getLogger(__name__)

SEARCH_CASE = "search"
SEARCH_HEADER = ["order", "mean_test_error", "std_test_error", "n_seeds"]


@attr.s
class TrainOutcome:
    case = attr.ib()
    order = attr.ib()
    summaries = attr.ib(factory=list)
    lr = attr.ib(default=None)
    test_errors = attr.ib(factory=list)

    @property
    def completed(self):
        return all(summary.completed for summary in self.summaries)


@attr.s
class SearchOutcome:
    rows = attr.ib(factory=list)
    summaries = attr.ib(factory=list)

    @property
    def completed(self):
        return all(summary.completed for summary in self.summaries)


def load_experiment(path, overrides=None):
    """Read an experiment YAML file; overrides (e.g. from CLI flags) win over the file."""
    data = storage.read_yaml(path)
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return ExperimentConfig.parse(data)


def order_for_case(experiment, logger=None):
    """(order, epochs per layer) realizing the experiment's case."""
    logger = logger or default_logger
    num_layers = experiment.network_spec.num_weight_layers
    case = experiment.case

    if case == constants.Case.FLOAT:
        return None, experiment.epochs_per_layer
    if case == constants.Case.BINARY:
        return schedule.make_order(constants.OrderKind.FORWARD, num_layers), 0
    if case in (constants.Case.FORWARD, constants.Case.REVERSE, constants.Case.RANDOM):
        order = schedule.make_order(case.value, num_layers, seed=experiment.random_order_seed)
        return order, experiment.epochs_per_layer
    if case == constants.Case.EXPLICIT:
        order = schedule.make_order(
            constants.OrderKind.EXPLICIT, num_layers, order=experiment.order
        )
        return order, experiment.epochs_per_layer

    sensitivity_report = sensitivity.load_report(experiment.sensitivity_report)
    if sensitivity_report.num_layers != num_layers:
        raise exc.ConfigurationError(
            f"Sensitivity report has {sensitivity_report.num_layers} layers, "
            f"network {experiment.network} has {num_layers}"
        )
    if case == constants.Case.ASCENDING:
        order = schedule.make_order(
            constants.OrderKind.EXPLICIT, num_layers, order=sensitivity_report
        )
    else:
        order = sensitivity_report.descending_order
    logger.info(f"Order {format_order(order)} taken from {experiment.sensitivity_report}")
    return order, experiment.epochs_per_layer


def build_plan(experiment, order, epochs_per_layer, lr, seed):
    return TrainPlan(
        order=order,
        epochs_per_layer=epochs_per_layer,
        total_epochs=experiment.total_epochs,
        lr0=lr,
        lr_milestones=experiment.lr_milestones,
        optimizer=experiment.optimizer,
        batch_size=experiment.batch_size,
        seed=seed,
    )


def train_jobs(experiment, output_dir, case, order, epochs_per_layer):
    """One job per (lr, seed) pair, grid order first."""
    network_spec = experiment.network_spec
    return [
        TrainJob(
            network_spec=network_spec,
            case=case,
            plan=build_plan(experiment, order, epochs_per_layer, lr, seed),
            directory=storage.run_dir(output_dir, case, format_order(order), seed, lr),
        )
        for lr in experiment.lr_grid
        for seed in experiment.seeds
    ]


def _output_dir(experiment, cfg):
    return experiment.output_dir or cfg.output_dir


def _load_data(experiment, cfg, logger):
    return MnistLoader(experiment.data_dir or cfg.data_dir, logger=logger).load()


def _log_failures(summaries, logger):
    for summary in summaries:
        if not summary.completed:
            logger.warning(
                f"Run {summary.case}/{summary.order} seed {summary.seed} lr {summary.lr} "
                f"did not complete: {summary.diagnostic}"
            )


def cmd_train(experiment, cfg=None, data=None, runner=None, logger=None):
    """Train every (lr, seed) pair of the experiment's case and select the lr.

    The selected lr has the lowest mean validation error over seeds; the case's test
    errors are those of the selected lr's checkpoints.
    """
    logger = logger or default_logger
    cfg = cfg or config.Config()
    case = experiment.case.value
    order, epochs_per_layer = order_for_case(experiment, logger)
    output_dir = _output_dir(experiment, cfg)

    jobs = train_jobs(experiment, output_dir, case, order, epochs_per_layer)
    storage.write_experiment(output_dir, experiment)
    logger.info(
        f"Case {case} on {experiment.network}: order {format_order(order)}, "
        f"{len(experiment.seeds)} seeds x {len(experiment.lr_grid)} learning rates"
    )

    if data is None:
        data = _load_data(experiment, cfg, logger)
    runner = runner or get_runner(cfg, logger=logger)
    summaries = runner.run(jobs, data)
    _log_failures(summaries, logger)

    runs = [(job.directory, summary) for job, summary in zip(jobs, summaries)]
    lr, selected = report.select_case_runs(runs, experiment.lr_grid)
    outcome = TrainOutcome(case=case, order=format_order(order), summaries=summaries, lr=lr)
    if lr is None:
        logger.error(f"No run of case {case} completed")
        return outcome

    outcome.test_errors = [summary.test_error for _, summary in selected]
    mean, std = report.mean_std(outcome.test_errors)
    logger.info(
        f"Case {case}: selected lr {lr}, test error {mean:.4f} +/- {std:.4f} "
        f"over {len(selected)} seeds"
    )
    return outcome


def cmd_sensitivity(experiment, cfg=None, data=None, runner=None, report_path=None, logger=None):
    """Train one probe per weight-bearing layer and write the sensitivity report."""
    logger = logger or default_logger
    cfg = cfg or config.Config()
    network_spec = experiment.network_spec
    num_layers = network_spec.num_weight_layers
    seeds = sensitivity.probe_seeds_for(experiment)

    jobs = [
        ProbeJob(
            network_spec=network_spec,
            layer=layer,
            probe_epochs=experiment.probe_epochs,
            lr_grid=experiment.lr_grid,
            seed=seeds[layer - 1],
            optimizer=experiment.optimizer,
            batch_size=experiment.batch_size,
            lr_milestones=experiment.probe_lr_milestones,
        )
        for layer in range(1, num_layers + 1)
    ]
    logger.info(
        f"Sensitivity of {experiment.network}: {num_layers} probes of "
        f"{experiment.probe_epochs} epochs"
    )

    if data is None:
        data = _load_data(experiment, cfg, logger)
    runner = runner or get_runner(cfg, logger=logger)
    results = runner.run(jobs, data)

    sensitivity_report = sensitivity.build_report(results, num_layers, experiment.network)
    path = (
        report_path
        or experiment.sensitivity_report
        or os.path.join(_output_dir(experiment, cfg), constants.SENSITIVITY_FILENAME)
    )
    sensitivity.write_report(sensitivity_report, path)
    logger.info(
        f"Wrote {path}: ascending {format_order(sensitivity_report.ascending_order)}, "
        f"descending {format_order(sensitivity_report.descending_order)}"
    )
    return sensitivity_report


def check_order_count(num_layers, cap):
    count = math.factorial(num_layers)
    if count > cap:
        raise exc.ConfigurationError(
            f"Refusing to search {count} binarization orders ({num_layers}! for "
            f"{num_layers} weight-bearing layers), the cap is {cap}"
        )
    return count


def cmd_search_orders(experiment, cfg=None, data=None, runner=None, logger=None):
    """Train every binarization order and rank them by mean test error."""
    logger = logger or default_logger
    cfg = cfg or config.Config()
    num_layers = experiment.network_spec.num_weight_layers
    count = check_order_count(num_layers, int(cfg.search_order_cap))
    output_dir = _output_dir(experiment, cfg)

    orders = list(itertools.permutations(range(1, num_layers + 1)))
    jobs_by_order = {
        order: train_jobs(experiment, output_dir, SEARCH_CASE, order, experiment.epochs_per_layer)
        for order in orders
    }
    jobs = [job for order in orders for job in jobs_by_order[order]]
    storage.write_experiment(output_dir, experiment)
    logger.info(f"Searching {count} orders of {experiment.network} ({len(jobs)} runs)")

    if data is None:
        data = _load_data(experiment, cfg, logger)
    runner = runner or get_runner(cfg, logger=logger)
    summaries = runner.run(jobs, data)
    _log_failures(summaries, logger)
    by_directory = {job.directory: summary for job, summary in zip(jobs, summaries)}

    rows = []
    for order in orders:
        runs = [(job.directory, by_directory[job.directory]) for job in jobs_by_order[order]]
        lr, selected = report.select_case_runs(runs, experiment.lr_grid)
        if lr is None:
            logger.warning(f"Order {format_order(order)} has no completed runs, omitted")
            continue
        mean, std = report.mean_std([summary.test_error for _, summary in selected])
        rows.append(
            {
                "order": format_order(order),
                "mean_test_error": mean,
                "std_test_error": std,
                "n_seeds": len(selected),
            }
        )
    rows.sort(key=lambda row: (row["mean_test_error"], row["order"]))

    path = os.path.join(output_dir, constants.SEARCH_ORDERS_FILENAME)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SEARCH_HEADER, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                dict(
                    row,
                    mean_test_error=repr(row["mean_test_error"]),
                    std_test_error=repr(row["std_test_error"]),
                )
            )
    for row in rows:
        logger.info(
            f"Order {row['order']}: {row['mean_test_error']:.4f} "
            f"+/- {row['std_test_error']:.4f} ({row['n_seeds']} seeds)"
        )
    return SearchOutcome(rows=rows, summaries=summaries)
