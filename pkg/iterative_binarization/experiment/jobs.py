"""Units of work handed to runners; each one is independent and picklable."""

import logging
import os

import attr

from iterative_binarization import constants
from iterative_binarization import schedule
from iterative_binarization import sensitivity
from iterative_binarization.engine import Network
from iterative_binarization.experiment import storage
from iterative_binarization.schema import NetworkSpec, OptimizerSpec, RunSummary, TrainPlan

default_logger = logging.getLogger(__name__)


@attr.s(frozen=True)
class TrainJob:
    """One (case, order, seed, lr) training run written to its own directory."""

    network_spec = attr.ib(type=NetworkSpec)
    case = attr.ib()
    plan = attr.ib(type=TrainPlan)
    directory = attr.ib()

    @property
    def digest(self):
        return storage.run_digest(self.network_spec, self.plan, self.case)

    def execute(self, data, cfg=None, logger=None):
        logger = logger or default_logger
        digest = self.digest
        done = storage.find_completed(self.directory, digest, logger=logger)
        if done is not None:
            logger.info(f"Skipping finished run {self.directory}")
            return done

        os.makedirs(self.directory, exist_ok=True)
        net = Network(self.network_spec, seed=self.plan.seed, logger=logger)
        result = schedule.run_iterative(self.plan, net, data, cfg=cfg, logger=logger)
        storage.write_metrics(
            os.path.join(self.directory, constants.METRICS_FILENAME), result.records
        )

        checkpoint = result.checkpoint
        checkpoint_sha256 = None
        if checkpoint is not None:
            checkpoint_sha256 = storage.save_checkpoint(
                os.path.join(self.directory, constants.CHECKPOINT_FILENAME), checkpoint
            )

        summary = RunSummary(
            network=self.network_spec.name,
            case=self.case,
            order=self.plan.order_name,
            seed=self.plan.seed,
            lr=self.plan.lr0,
            digest=digest,
            status=result.status,
            best_epoch=None if checkpoint is None else checkpoint.epoch,
            val_error=None if checkpoint is None else checkpoint.val_error,
            test_error=None if checkpoint is None else checkpoint.test_error,
            diagnostic=result.diagnostic,
            diverged_epoch=result.diverged_epoch,
            wall_time=result.wall_time,
            checkpoint_sha256=checkpoint_sha256,
        )
        if checkpoint is None and summary.completed:
            summary = attr.evolve(
                summary,
                status=constants.RUN_STATUS_DIVERGED,
                diagnostic="No epoch was eligible for checkpoint selection",
            )
        storage.write_summary(os.path.join(self.directory, constants.SUMMARY_FILENAME), summary)
        return summary


@attr.s(frozen=True)
class ProbeJob:
    network_spec = attr.ib(type=NetworkSpec)
    layer = attr.ib()
    probe_epochs = attr.ib()
    lr_grid = attr.ib(converter=tuple)
    seed = attr.ib()
    optimizer = attr.ib(type=OptimizerSpec)
    batch_size = attr.ib()
    lr_milestones = attr.ib(converter=tuple, default=())

    def execute(self, data, cfg=None, logger=None):
        selection = constants.ProbeSelection.BEST
        if cfg is not None:
            selection = cfg.probe_selection
        return sensitivity.run_probe(
            self.network_spec,
            self.layer,
            self.probe_epochs,
            self.lr_grid,
            self.seed,
            data,
            optimizer=self.optimizer,
            batch_size=self.batch_size,
            lr_milestones=self.lr_milestones,
            selection=selection,
            cfg=cfg,
            logger=logger,
        )
