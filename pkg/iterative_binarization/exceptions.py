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


class BinarizationError(Exception):
    """Base class for iterative-binarization exceptions"""


class ConfigurationError(BinarizationError):
    """Invalid network spec, plan, order or experiment config."""


class UsageError(BinarizationError):
    """An API was called out of sequence."""


class DataError(BinarizationError):
    pass


class IdxParseError(DataError):
    """IDX container could not be parsed; offset is the byte where parsing failed."""

    def __init__(self, msg=None, offset=None):
        msg = msg or "Invalid IDX data"
        if offset is not None:
            msg = f"{msg} (at byte offset {offset})"
        super().__init__(msg)
        self.offset = offset


class DegenerateVarianceError(BinarizationError):
    """Batch statistics cannot be computed from a single example."""


class TrainingDivergedError(BinarizationError):
    """Loss became NaN or infinite during training."""

    def __init__(self, epoch=None, msg=None):
        msg = msg or f"Loss is not finite at epoch {epoch}"
        super().__init__(msg)
        self.epoch = epoch
