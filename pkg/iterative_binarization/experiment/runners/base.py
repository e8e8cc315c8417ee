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

import abc
import logging

default_logger = logging.getLogger(__name__)


class BaseRunner:
    """
    :param cfg: tool Config, handed to every job.
    :param workers: number of jobs allowed to run at once.
    """

    def __init__(self, cfg, workers=1, logger=None):
        self.log = logger or default_logger
        self.cfg = cfg
        self.workers = workers

    @abc.abstractmethod
    def run(self, jobs, data):
        """Execute jobs against the shared read-only data; results keep job order."""
