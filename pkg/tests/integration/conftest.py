import atexit
import os
import shutil
import tempfile

import pytest

DATA_DIR_ENV = "ITERATIVE_BINARIZATION_DATA_DIR"


def clean_files(path):
    shutil.rmtree(path)


@pytest.fixture
def workdir():
    tdir = tempfile.mkdtemp()
    atexit.register(clean_files, tdir)
    return tdir


@pytest.fixture
def mnist_dir():
    """Directory with the four MNIST IDX files; the test is skipped without one."""
    data_dir = os.environ.get(DATA_DIR_ENV)
    if not data_dir or not os.path.isdir(data_dir):
        pytest.skip(f"{DATA_DIR_ENV} does not point at an MNIST directory")
    return data_dir


@pytest.fixture
def local_config(workdir):
    config = [
        "[iterative-binarization]",
        "EVAL_BATCH_SIZE=2000",
        "WORKERS=1",
    ]
    config = "\n".join(config)

    config_path = os.path.join(workdir, "iterative-binarization.cfg")
    with open(config_path, "w") as f:
        f.write(config)

    return {"ITERATIVE_BINARIZATION_CONFIG": config_path}


@pytest.fixture
def short_experiment(workdir):
    """A three-epoch iterative run of the small network."""
    experiment = [
        "network: 300-100-10",
        "case: forward",
        "epochs_per_layer: 1",
        "total_epochs: 3",
        "probe_epochs: 1",
        "lr_grid: [0.001]",
        "seeds: [0]",
    ]
    path = os.path.join(workdir, "experiment.yaml")
    with open(path, "w") as f:
        f.write("\n".join(experiment) + "\n")
    return path
