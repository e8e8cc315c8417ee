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

import logging

from .pool import PoolRunner
from .serial import SerialRunner

default_logger = logging.getLogger(__name__)


def get_runner(cfg, logger=None):
    """Decide which runner executes jobs, based on the configured worker count."""

    workers = int(cfg.workers or 1)
    if workers > 1:
        return PoolRunner(cfg, workers=workers, logger=logger)

    return SerialRunner(cfg, logger=logger)
