"""Run directory layout and the files inside it.

    <out>/experiment.yaml
    <out>/<case>/<order>/<seed>/lr_<lr>/metrics.csv
                                        summary.yaml
                                        checkpoint.npz
"""

import csv
import logging
import os

import numpy as np
import yaml

from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization.binarize import BinarizationState
from iterative_binarization.schedule import Checkpoint
from iterative_binarization.schema import MetricsRecord, RunSummary
from iterative_binarization.utils import chksums

default_logger = logging.getLogger(__name__)

PARAM_PREFIX = "param."


def run_dir(output_dir, case, order_name, seed, lr):
    return os.path.join(output_dir, case, order_name, str(seed), f"lr_{lr:g}")


def run_digest(network_spec, plan, case):
    """Content address of a run: everything that determines its outcome."""
    return chksums.sha256sum_from_data(
        {"network": network_spec.to_dict(), "plan": plan.to_dict(), "case": case}
    )


def write_metrics(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(constants.METRICS_CSV_HEADER)
        for record in records:
            writer.writerow(record.to_row())


def read_metrics(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != constants.METRICS_CSV_HEADER:
            raise exc.DataError(
                f"Unexpected metrics header in {path}: {reader.fieldnames}, "
                f"expected {constants.METRICS_CSV_HEADER}"
            )
        return [MetricsRecord.from_row(row) for row in reader]


def write_summary(path, summary):
    with open(path, "w") as fh:
        yaml.safe_dump(summary.to_dict(), fh, sort_keys=False)


def read_summary(path):
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise exc.DataError(f"Invalid run summary {path}: {e}")
    try:
        return RunSummary.parse(data)
    except TypeError as e:
        raise exc.DataError(f"Invalid run summary {path}: {e}")


def save_checkpoint(path, checkpoint):
    arrays = {PARAM_PREFIX + name: value for name, value in checkpoint.params.items()}
    with open(path, "wb") as fh:
        np.savez(
            fh,
            state=np.array(checkpoint.state.bitstring),
            epoch=np.array(checkpoint.epoch),
            val_error=np.array(checkpoint.val_error),
            test_error=np.array(checkpoint.test_error),
            **arrays,
        )
    return chksums.sha256sum_from_path(path)


def load_checkpoint(path, expected_sha256=None):
    if expected_sha256:
        chksums.check_file_chksum(path, expected_sha256)
    with np.load(path) as data:
        params = {
            key[len(PARAM_PREFIX) :]: data[key]
            for key in data.files
            if key.startswith(PARAM_PREFIX)
        }
        return Checkpoint(
            epoch=int(data["epoch"]),
            state=BinarizationState.from_bitstring(str(data["state"])),
            params=params,
            val_error=float(data["val_error"]),
            test_error=float(data["test_error"]),
        )


def find_completed(directory, digest, logger=None):
    """Summary of a finished run in directory, or None when it must be (re)computed."""
    logger = logger or default_logger
    path = os.path.join(directory, constants.SUMMARY_FILENAME)
    if not os.path.isfile(path):
        return None
    try:
        summary = read_summary(path)
    except exc.DataError as e:
        logger.warning(f"Ignoring unreadable summary: {e}")
        return None
    if summary.digest != digest:
        logger.info(f"Run description changed, recomputing {directory}")
        return None
    return summary


def write_experiment(output_dir, experiment):
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, constants.EXPERIMENT_FILENAME)
    with open(path, "w") as fh:
        yaml.safe_dump(experiment.to_dict(), fh, sort_keys=False)
    return path


def read_yaml(path):
    if not os.path.isfile(path):
        raise exc.ConfigurationError(f"File not found: {path}")
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise exc.ConfigurationError(f"Invalid YAML in {path}: {e}")
    if not isinstance(data, dict):
        raise exc.ConfigurationError(f"Expected a mapping in {path}")
    return data


def iter_summaries(output_dir, case):
    """Yield (run directory, RunSummary) for every summary under <output_dir>/<case>."""
    case_dir = os.path.join(output_dir, case)
    for root, dirs, files in os.walk(case_dir):
        dirs.sort()
        if constants.SUMMARY_FILENAME in files:
            yield root, read_summary(os.path.join(root, constants.SUMMARY_FILENAME))
