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

import attr
import numpy as np

from iterative_binarization import constants
from iterative_binarization import exceptions as exc

TRAIN = "train"
VAL = "val"
TEST = "test"


def _read_only(array):
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@attr.s(frozen=True, eq=False)
class Dataset:
    """Immutable images and labels; safe to share between concurrent runs."""

    images = attr.ib(converter=_read_only)
    labels = attr.ib(converter=_read_only)
    split = attr.ib(default=TRAIN)

    @labels.validator
    def _check_labels(self, attribute, value):
        if value.ndim != 1 or len(value) != len(self.images):
            raise exc.DataError(
                f"Expected one label per image ({len(self.images)}), got shape {value.shape}"
            )
        if value.dtype.kind not in "iu":
            raise exc.DataError(f"Labels must be integers, got dtype {value.dtype}")

    def __len__(self):
        return len(self.labels)


@attr.s(frozen=True, eq=False)
class Splits:
    train = attr.ib(type=Dataset)
    val = attr.ib(type=Dataset)
    test = attr.ib(type=Dataset)


def normalize_images(raw):
    """Scale unsigned-byte pixels to [0, 1] by dividing by 255, flattened per example."""
    images = np.asarray(raw, dtype=np.float32) / np.float32(constants.PIXEL_SCALE)
    return images.reshape(len(images), -1)


def split(train_images, train_labels, validation_size=constants.MNIST_VALIDATION_SIZE):
    """Hold out the last validation_size examples, in file order, for validation.

    :return: (train, val) datasets.
    """
    if len(train_images) != constants.MNIST_TRAIN_TOTAL or len(train_labels) != len(train_images):
        raise exc.ConfigurationError(
            f"Expected {constants.MNIST_TRAIN_TOTAL} training images and labels, "
            f"got {len(train_images)} images and {len(train_labels)} labels"
        )
    boundary = len(train_images) - validation_size
    train = Dataset(train_images[:boundary], train_labels[:boundary], TRAIN)
    val = Dataset(train_images[boundary:], train_labels[boundary:], VAL)
    return train, val


def batches(dataset, batch_size, epoch_seed):
    """Yield (x, y) batches of a uniform shuffle seeded by epoch_seed.

    epoch_seed is anything numpy.random.default_rng accepts, typically (run seed, epoch).
    The final short batch is included.
    """
    if batch_size < 1:
        raise exc.ConfigurationError(f"Batch size must be >= 1, got {batch_size}")
    rng = np.random.default_rng(epoch_seed)
    permutation = rng.permutation(len(dataset))
    for start in range(0, len(dataset), batch_size):
        index = permutation[start : start + batch_size]
        yield dataset.images[index], dataset.labels[index]
