import logging
import os

import numpy as np

from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization import file_parser
from iterative_binarization.loaders import dataset as ds

default_logger = logging.getLogger(__name__)


class MnistLoader:
    """Loads the four canonical MNIST IDX files from a local directory.

    Files may be plain or gzip compressed (`<name>` or `<name>.gz`). Nothing is ever
    downloaded. Images are flattened to 784 features; networks reshape their input.
    """

    def __init__(self, data_dir, logger=None):
        self.log = logger or default_logger
        self.data_dir = data_dir

    def load(self):
        if not self.data_dir:
            raise exc.DataError(
                "No MNIST data directory given; use --data-dir or ITERATIVE_BINARIZATION_DATA_DIR"
            )
        self.log.info(f"Loading MNIST from {self.data_dir}")

        train_images = self._load_images("train_images")
        train_labels = self._load_labels("train_labels", len(train_images))
        test_images = self._load_images("test_images")
        test_labels = self._load_labels("test_labels", len(test_images))

        train, val = ds.split(train_images, train_labels)
        test = ds.Dataset(test_images, test_labels, ds.TEST)
        self.log.info(f"MNIST split sizes: train {len(train)}, val {len(val)}, test {len(test)}")
        return ds.Splits(train=train, val=val, test=test)

    def find_file(self, key):
        name = constants.MNIST_FILES[key]
        for candidate in (name, f"{name}.gz"):
            path = os.path.join(self.data_dir, candidate)
            if os.path.isfile(path):
                return path
        raise exc.DataError(f"MNIST file '{name}' (or '{name}.gz') not found in {self.data_dir}")

    def _read(self, key):
        return file_parser.read_idx_file(self.find_file(key), logger=self.log)

    def _load_images(self, key):
        idx = self._read(key)
        if len(idx.dims) != 3 or idx.dims[1:] != constants.MNIST_IMAGE_SHAPE:
            raise exc.DataError(f"Expected images of shape (n, 28, 28) in {key}, got {idx.dims}")
        return ds.normalize_images(idx.payload)

    def _load_labels(self, key, expected):
        idx = self._read(key)
        if idx.dims != (expected,):
            raise exc.DataError(f"Expected {expected} labels in {key}, got dims {idx.dims}")
        labels = idx.payload.astype(np.int64)
        if labels.max(initial=0) >= constants.MNIST_NUM_CLASSES:
            raise exc.DataError(f"Labels in {key} must be in [0, {constants.MNIST_NUM_CLASSES})")
        return labels
