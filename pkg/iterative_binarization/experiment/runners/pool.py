import logging
from multiprocessing import Pool

from iterative_binarization import constants
from iterative_binarization.experiment.runners.base import BaseRunner

default_logger = logging.getLogger(__name__)

# Set once per worker process by _init_worker
_worker_data = None
_worker_cfg = None
_worker_logger = default_logger


def _init_worker(data, cfg, logger_name, setup_logging):
    global _worker_data, _worker_cfg, _worker_logger
    _worker_data = data
    _worker_cfg = cfg
    _worker_logger = logging.getLogger(logger_name)
    # spawned workers start without the handlers the parent attached
    if setup_logging and not logging.getLogger(constants.PACKAGE_LOGGER).handlers:
        from iterative_binarization import main

        main.setup_logger(cfg)


def _execute(job):
    return job.execute(_worker_data, cfg=_worker_cfg, logger=_worker_logger)


class PoolRunner(BaseRunner):
    """Run jobs in a pool of worker processes.

    The dataset is sent to each worker once, when the worker starts; jobs only carry
    their own description. Workers log through the runner's logger, with the package
    logging set up like the parent's.
    """

    def worker_args(self, data):
        setup_logging = bool(logging.getLogger(constants.PACKAGE_LOGGER).handlers)
        return (data, self.cfg, self.log.name, setup_logging)

    def run(self, jobs, data):
        jobs = list(jobs)
        if not jobs:
            return []
        processes = min(self.workers, len(jobs))
        self.log.info(f"Running {len(jobs)} jobs on {processes} worker processes")
        with Pool(
            processes=processes, initializer=_init_worker, initargs=self.worker_args(data)
        ) as pool:
            return pool.map(_execute, jobs, chunksize=1)
