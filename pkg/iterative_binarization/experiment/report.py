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

"""Aggregation of finished runs into per-case tables, improvements and curves."""

import csv
import logging
import os

import numpy as np

from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization import schedule
from iterative_binarization.experiment import storage
from iterative_binarization.schema import AggregateResult, CaseAggregate

default_logger = logging.getLogger(__name__)

REPORT_HEADER = ["network", "case", "lr", "mean_test_error", "std_test_error", "n_seeds"]
IMPROVEMENT_HEADER = ["case", "small", "big", "improvement"]
CURVE_HEADER = ["epoch", "mean_test_error", "std_test_error"]


def select_case_runs(runs, lr_grid=None):
    """Choose the lr of a case and return its completed runs.

    :param runs: list of (run directory, RunSummary).
    :param lr_grid: preferred order for tie-breaking; lr values it does not list
        follow in ascending order.
    :return: (lr, [(run directory, RunSummary)] sorted by seed); lr is None when no
        run completed.
    """
    completed = [(path, summary) for path, summary in runs if summary.completed]
    trained = {summary.lr for _, summary in completed}
    preferred = [lr for lr in (lr_grid or ()) if lr in trained]
    grid = preferred + sorted(trained - set(preferred))
    candidates = [
        (lr, [summary.val_error for _, summary in completed if summary.lr == lr]) for lr in grid
    ]
    lr = schedule.select_learning_rate(candidates)
    selected = [(path, summary) for path, summary in completed if summary.lr == lr]
    return lr, sorted(selected, key=lambda run: run[1].seed)


def mean_std(values):
    values = np.asarray(values, dtype=np.float64)
    return float(np.mean(values)), float(np.std(values))


def learning_curve(run_paths, logger=None):
    """Per-epoch mean and std of test error over the given runs' metrics files.

    Only epochs present in every run contribute.
    """
    logger = logger or default_logger
    curves = []
    for path in run_paths:
        metrics_path = os.path.join(path, constants.METRICS_FILENAME)
        if not os.path.isfile(metrics_path):
            logger.warning(f"No metrics in {path}, leaving it out of the learning curve")
            continue
        curves.append({r.epoch: r.test_error for r in storage.read_metrics(metrics_path)})
    if not curves:
        return (), (), ()

    epochs = sorted(set.intersection(*(set(curve) for curve in curves)))
    table = np.array([[curve[epoch] for epoch in epochs] for curve in curves], dtype=np.float64)
    return tuple(epochs), tuple(table.mean(axis=0)), tuple(table.std(axis=0))


def aggregate_case(network, case, runs, lr_grid=None, logger=None):
    """CaseAggregate of one case, or None when none of its runs completed."""
    lr, selected = select_case_runs(runs, lr_grid)
    if lr is None:
        return None
    mean, std = mean_std([summary.test_error for _, summary in selected])
    epochs, curve_mean, curve_std = learning_curve([path for path, _ in selected], logger)
    return CaseAggregate(
        network=network,
        case=case,
        lr=lr,
        mean_test_error=mean,
        std_test_error=std,
        n_seeds=len(selected),
        curve_epochs=epochs,
        curve_mean=curve_mean,
        curve_std=curve_std,
    )


def improvement(first, second):
    return round(first - second, constants.REPORT_PRECISION)


def _network_name(run_dir):
    path = os.path.join(run_dir, constants.EXPERIMENT_FILENAME)
    if os.path.isfile(path):
        return storage.read_yaml(path).get("network") or os.path.basename(run_dir)
    return os.path.basename(os.path.normpath(run_dir))


def _lr_grid(run_dir):
    path = os.path.join(run_dir, constants.EXPERIMENT_FILENAME)
    if os.path.isfile(path):
        return storage.read_yaml(path).get("lr_grid")
    return None


def aggregate_run_dir(run_dir, cases=None, logger=None):
    """Aggregates for every case found (or requested) under run_dir."""
    logger = logger or default_logger
    if not os.path.isdir(run_dir):
        raise exc.ConfigurationError(f"Run directory not found: {run_dir}")
    network = _network_name(run_dir)
    lr_grid = _lr_grid(run_dir)
    wanted = [constants.Case(case) for case in cases] if cases else list(constants.Case)

    aggregates = []
    for case in wanted:
        if not os.path.isdir(os.path.join(run_dir, case.value)):
            if cases:
                logger.warning(f"Case '{case.value}' has no runs in {run_dir}, omitted")
            continue
        runs = list(storage.iter_summaries(run_dir, case.value))
        aggregate = aggregate_case(network, case.value, runs, lr_grid, logger)
        if aggregate is None:
            logger.warning(f"Case '{case.value}' has no completed runs in {run_dir}, omitted")
            continue
        aggregates.append(aggregate)
    return aggregates


def compute_improvements(first, second, logger=None):
    """Error of the first network minus that of the second, for cases both have."""
    logger = logger or default_logger
    by_case = {aggregate.case: aggregate for aggregate in second}
    rows = []
    for aggregate in first:
        other = by_case.get(aggregate.case)
        if other is None:
            logger.warning(f"Case '{aggregate.case}' missing for the second network, omitted")
            continue
        rows.append(
            {
                "case": aggregate.case,
                "small": aggregate.mean_test_error,
                "big": other.mean_test_error,
                "improvement": improvement(aggregate.mean_test_error, other.mean_test_error),
            }
        )
    for case in sorted(set(by_case) - {aggregate.case for aggregate in first}):
        logger.warning(f"Case '{case}' missing for the first network, omitted")
    return rows


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def write_report(output_dir, result):
    os.makedirs(output_dir, exist_ok=True)
    _write_csv(
        os.path.join(output_dir, constants.REPORT_FILENAME),
        REPORT_HEADER,
        [
            {
                "network": a.network,
                "case": a.case,
                "lr": repr(a.lr),
                "mean_test_error": repr(a.mean_test_error),
                "std_test_error": repr(a.std_test_error),
                "n_seeds": a.n_seeds,
            }
            for a in result.cases
        ],
    )
    if result.improvements:
        _write_csv(
            os.path.join(output_dir, constants.IMPROVEMENT_FILENAME),
            IMPROVEMENT_HEADER,
            result.improvements,
        )
    for a in result.cases:
        if not a.curve_epochs:
            continue
        _write_csv(
            os.path.join(output_dir, f"curves_{a.network}_{a.case}.csv"),
            CURVE_HEADER,
            [
                {"epoch": epoch, "mean_test_error": repr(mean), "std_test_error": repr(std)}
                for epoch, mean, std in zip(a.curve_epochs, a.curve_mean, a.curve_std)
            ],
        )


def cmd_report(run_dirs, output_dir=None, cases=None, logger=None):
    """Aggregate one or two run directories.

    With two run directories the improvement of each case is the first directory's
    mean test error minus the second's.
    """
    logger = logger or default_logger
    if not run_dirs or len(run_dirs) > 2:
        raise exc.ConfigurationError(
            f"Report takes one or two run directories, got {len(run_dirs or [])}"
        )

    per_dir = [aggregate_run_dir(run_dir, cases, logger) for run_dir in run_dirs]
    improvements = ()
    if len(per_dir) == 2:
        improvements = compute_improvements(per_dir[0], per_dir[1], logger)

    result = AggregateResult(
        cases=[aggregate for aggregates in per_dir for aggregate in aggregates],
        improvements=improvements,
    )
    output_dir = output_dir or run_dirs[0]
    write_report(output_dir, result)
    for a in result.cases:
        logger.info(
            f"{a.network} {a.case}: {a.mean_test_error:.4f} +/- {a.std_test_error:.4f} "
            f"({a.n_seeds} seeds, lr {a.lr})"
        )
    for row in improvements:
        logger.info(f"Improvement {row['case']}: {row['improvement']}")
    return result
