import numpy as np
import pytest

from iterative_binarization import config
from iterative_binarization import constants
from iterative_binarization.loaders import Dataset, Splits
from iterative_binarization.schema import NetworkSpec


TOY_FEATURES = 8
TOY_CLASSES = 3

TOY_PRESETS = {
    "toy-2": {
        "input_shape": [TOY_FEATURES],
        "layers": [
            {"kind": "dense", "in_features": TOY_FEATURES, "out_features": 6},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 6, "out_features": TOY_CLASSES},
        ],
        "defaults": {
            "batch_size": 16,
            "optimizer": "adam",
            "epochs_per_layer": 1,
            "total_epochs": 3,
            "probe_epochs": 2,
        },
    },
    "toy-3": {
        "input_shape": [TOY_FEATURES],
        "layers": [
            {"kind": "dense", "in_features": TOY_FEATURES, "out_features": 6},
            {"kind": "batchnorm", "features": 6},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 6, "out_features": 5},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 5, "out_features": TOY_CLASSES},
        ],
        "defaults": {
            "batch_size": 16,
            "optimizer": "adam",
            "epochs_per_layer": 1,
            "total_epochs": 4,
            "probe_epochs": 2,
        },
    },
}


def make_blobs(n, seed, split):
    """Three gaussian clusters in TOY_FEATURES dimensions."""
    rng = np.random.default_rng(seed)
    centers = np.random.default_rng(1234).normal(0.0, 2.0, (TOY_CLASSES, TOY_FEATURES))
    labels = rng.integers(0, TOY_CLASSES, n)
    images = centers[labels] + rng.normal(0.0, 1.0, (n, TOY_FEATURES))
    return Dataset(images.astype(np.float32), labels.astype(np.int64), split)


@pytest.fixture
def toy_splits():
    return Splits(
        train=make_blobs(64, 0, "train"),
        val=make_blobs(24, 1, "val"),
        test=make_blobs(24, 2, "test"),
    )


@pytest.fixture
def toy_presets(mocker):
    mocker.patch.dict(constants.NETWORK_PRESETS, TOY_PRESETS)
    return TOY_PRESETS


@pytest.fixture
def toy_spec():
    return NetworkSpec.parse({"name": "toy-3", **TOY_PRESETS["toy-3"]})


@pytest.fixture
def cfg(tmp_path):
    return config.Config(
        config_data={"output_dir": str(tmp_path / "runs"), "eval_batch_size": 10, "workers": 1}
    )
