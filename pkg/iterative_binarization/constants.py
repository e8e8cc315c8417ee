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

import enum

BATCHNORM_EPS = 1e-5
BATCHNORM_MOMENTUM = 0.1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
SGD_MOMENTUM = 0.9
SGD_WEIGHT_DECAY = 1e-4

DEFAULT_LR_GRID = (3e-4, 1e-3, 3e-3)
SGD_LR_GRID = (0.01, 0.03, 0.1)
DEFAULT_SEARCH_ORDER_CAP = 24
DEFAULT_GRADCHECK_STEP = 1e-3

# Rounding applied to aggregated errors written by the report command
REPORT_PRECISION = 6

MNIST_TRAIN_TOTAL = 60000
MNIST_VALIDATION_SIZE = 5000
MNIST_TEST_SIZE = 10000
MNIST_NUM_CLASSES = 10
MNIST_IMAGE_SHAPE = (28, 28)
PIXEL_SCALE = 255.0
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

GZIP_MAGIC = b"\x1f\x8b"
# IDX type code -> big-endian numpy dtype
IDX_TYPE_CODES = {
    0x08: ">u1",
    0x09: ">i1",
    0x0B: ">i2",
    0x0C: ">i4",
    0x0D: ">f4",
    0x0E: ">f8",
}

METRICS_CSV_HEADER = ["epoch", "train_error", "val_error", "test_error", "lr", "binarized_layers"]
METRICS_FILENAME = "metrics.csv"
SUMMARY_FILENAME = "summary.yaml"
CHECKPOINT_FILENAME = "checkpoint.npz"
EXPERIMENT_FILENAME = "experiment.yaml"
REPORT_FILENAME = "report.csv"
IMPROVEMENT_FILENAME = "improvement.csv"
SEARCH_ORDERS_FILENAME = "search_orders.csv"
SENSITIVITY_FILENAME = "sensitivity.yaml"
FLOAT_ORDER_NAME = "none"

# Every module logger propagates to this one; the command line attaches its handler here
PACKAGE_LOGGER = "iterative_binarization"

RUN_STATUS_COMPLETED = "completed"
RUN_STATUS_DIVERGED = "diverged"

# Training defaults shared by both MNIST networks
_MNIST_DEFAULTS = {
    "batch_size": 100,
    "optimizer": "adam",
    "epochs_per_layer": 150,
    "total_epochs": 450,
    "probe_epochs": 150,
    "lr_grid": DEFAULT_LR_GRID,
}

NETWORK_PRESETS = {
    "300-100-10": {
        "input_shape": [784],
        "layers": [
            {"kind": "dense", "in_features": 784, "out_features": 300},
            {"kind": "batchnorm", "features": 300},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 300, "out_features": 100},
            {"kind": "batchnorm", "features": 100},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 100, "out_features": 10},
        ],
        "defaults": _MNIST_DEFAULTS,
    },
    "784-784-10": {
        "input_shape": [784],
        "layers": [
            {"kind": "dense", "in_features": 784, "out_features": 784},
            {"kind": "batchnorm", "features": 784},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 784, "out_features": 784},
            {"kind": "batchnorm", "features": 784},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 784, "out_features": 10},
        ],
        "defaults": _MNIST_DEFAULTS,
    },
    "conv-small": {
        "input_shape": [1, 28, 28],
        "layers": [
            {
                "kind": "conv2d",
                "in_channels": 1,
                "out_channels": 8,
                "kernel": 3,
                "stride": 1,
                "pad": 1,
            },
            {"kind": "batchnorm", "features": 8},
            {"kind": "relu"},
            {
                "kind": "conv2d",
                "in_channels": 8,
                "out_channels": 8,
                "kernel": 4,
                "stride": 2,
                "pad": 1,
            },
            {"kind": "batchnorm", "features": 8},
            {"kind": "relu"},
            {"kind": "flatten"},
            {"kind": "dense", "in_features": 8 * 14 * 14, "out_features": 10},
        ],
        "defaults": {
            "batch_size": 100,
            "optimizer": "sgd",
            "epochs_per_layer": 10,
            "total_epochs": 30,
            "probe_epochs": 10,
            "lr_grid": SGD_LR_GRID,
        },
    },
}


class Case(str, enum.Enum):
    FLOAT = "float"
    BINARY = "binary"
    FORWARD = "forward"
    REVERSE = "reverse"
    RANDOM = "random"
    EXPLICIT = "explicit"
    ASCENDING = "ascending"
    DESCENDING = "descending"

    @property
    def needs_report(self):
        return self in (Case.ASCENDING, Case.DESCENDING)


class OrderKind(str, enum.Enum):
    FORWARD = "forward"
    REVERSE = "reverse"
    RANDOM = "random"
    EXPLICIT = "explicit"


class OptimizerKind(str, enum.Enum):
    ADAM = "adam"
    SGD = "sgd"


class ProbeSelection(str, enum.Enum):
    BEST = "best"
    LAST = "last"
