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

"""Iterative layer-by-layer binarization training.

One more weight-bearing layer is binarized every N epochs, in a chosen order. Once
every layer is binarized, training continues until epoch T. Optimizer state carries
over unchanged when a flag flips.
"""

import logging
import time

import attr
import numpy as np

from iterative_binarization import binarize
from iterative_binarization import config
from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization.binarize import BinarizationState
from iterative_binarization.engine import Network, build_optimizer
from iterative_binarization.loaders import batches
from iterative_binarization.schema import MetricsRecord, check_permutation

default_logger = logging.getLogger(__name__)


def make_order(kind, num_layers, seed=None, order=None):
    """Binarization order as a 1-based permutation of num_layers layers.

    :param kind: forward, reverse, random or explicit.
    :param seed: seed of the random order.
    :param order: the permutation for the explicit kind; a SensitivityReport is
        accepted too, giving its ascending order.
    """
    if num_layers < 1:
        raise exc.ConfigurationError(f"Number of layers must be >= 1, got {num_layers}")
    kind = constants.OrderKind(kind)

    if kind == constants.OrderKind.FORWARD:
        return tuple(range(1, num_layers + 1))
    if kind == constants.OrderKind.REVERSE:
        return tuple(range(num_layers, 0, -1))
    if kind == constants.OrderKind.RANDOM:
        rng = np.random.default_rng(seed)
        return tuple(int(layer) for layer in rng.permutation(num_layers) + 1)

    if order is None:
        raise exc.ConfigurationError("Explicit order kind requires an order")
    if hasattr(order, "ascending_order"):
        order = order.ascending_order
    order = tuple(int(layer) for layer in order)
    check_permutation(order, num_layers)
    return order


def lr_at(epoch, lr0, milestones):
    """lr0 times the factor of every milestone reached; a milestone applies at its epoch."""
    if epoch < 1:
        raise exc.ConfigurationError(f"Epochs start at 1, got {epoch}")
    lr = lr0
    for milestone_epoch, factor in milestones:
        if milestone_epoch <= epoch:
            lr *= factor
    return lr


def binarization_state_at(plan, epoch, num_layers):
    """State in effect during `epoch` (1-based).

    Layer order[j] is flagged at the start of epoch j*N + 1, so with N = 0 every layer
    is flagged from epoch 1. A plan without an order never flags anything.
    """
    if plan.order is None:
        return BinarizationState.zeros(num_layers)
    if plan.epochs_per_layer == 0:
        flagged = len(plan.order)
    else:
        flagged = min(len(plan.order), (epoch - 1) // plan.epochs_per_layer + 1)
    return BinarizationState.from_layers(num_layers, plan.order[:flagged])


def select_best(records, restrict_to_fully_binarized):
    """Epoch with the lowest validation error; ties go to the earliest epoch."""
    if not records:
        raise exc.ConfigurationError("Cannot select from an empty list of records")
    eligible = [
        record
        for record in records
        if not restrict_to_fully_binarized or record.state.all_set
    ]
    if not eligible:
        raise exc.ConfigurationError("No epoch has all layers binarized")
    best = min(eligible, key=lambda record: (record.val_error, record.epoch))
    return best.epoch


def select_learning_rate(candidates):
    """Pick the lr with the lowest mean validation error.

    :param candidates: list of (lr, [validation errors]) in grid order; ties go to the
        earlier lr, empty error lists are skipped.
    :return: the lr, or None when no candidate has errors.
    """
    best_lr, best_error = None, None
    for lr, errors in candidates:
        if not errors:
            continue
        mean = float(np.mean(errors))
        if best_error is None or mean < best_error:
            best_lr, best_error = lr, mean
    return best_lr


@attr.s(frozen=True, eq=False)
class Checkpoint:
    epoch = attr.ib()
    state = attr.ib(type=BinarizationState)
    params = attr.ib()
    val_error = attr.ib()
    test_error = attr.ib()


@attr.s(eq=False)
class RunResult:
    network = attr.ib()
    records = attr.ib(factory=list)
    checkpoint = attr.ib(default=None)
    status = attr.ib(default=constants.RUN_STATUS_COMPLETED)
    diagnostic = attr.ib(default=None)
    diverged_epoch = attr.ib(default=None)
    wall_time = attr.ib(default=0.0)

    @property
    def completed(self):
        return self.status == constants.RUN_STATUS_COMPLETED


def evaluate(net, state, dataset, batch_size=1000):
    """Error rate of net on dataset, forward-propagating with the weights of state."""
    binarize.apply_binarization(net, state)
    return net.error_rate(dataset.images, dataset.labels, batch_size)


def evaluate_checkpoint(network_spec, checkpoint, dataset, dtype=np.float32, batch_size=1000):
    """Rebuild a network from a checkpoint and return its error rate on dataset."""
    net = Network(network_spec, dtype=dtype)
    net.load_state_dict(checkpoint.params)
    return evaluate(net, checkpoint.state, dataset, batch_size)


class Trainer:
    """Trains one network under a per-epoch binarization state.

    Every batch: apply the binarization state, forward, backward, route gradients
    straight through to the shadow weights and update them.
    """

    def __init__(self, net, plan, splits, cfg=None, logger=None):
        self.log = logger or default_logger
        self.net = net
        self.plan = plan
        self.splits = splits
        self.cfg = cfg or config.Config()
        self._has_batchnorm = any(layer.buffers for layer in net.layers)

    def run(self, state_for_epoch, restrict_to_fully_binarized):
        if len(self.splits.train) == 0:
            raise exc.DataError("Training set is empty")

        plan = self.plan
        optimizer = build_optimizer(plan.optimizer, plan.lr0)
        result = RunResult(network=self.net)
        started = time.perf_counter()
        previous = None

        for epoch in range(1, plan.total_epochs + 1):
            state = state_for_epoch(epoch)
            if state != previous:
                self.log.info(f"Epoch {epoch}: binarization state {state.bitstring}")
                previous = state
            optimizer.lr = lr_at(epoch, plan.lr0, plan.lr_milestones)

            try:
                train_error = self._train_epoch(optimizer, state, epoch)
            except exc.TrainingDivergedError as e:
                self.log.error(f"Run aborted: {e}")
                result.status = constants.RUN_STATUS_DIVERGED
                result.diagnostic = str(e)
                result.diverged_epoch = e.epoch
                break

            batch_size = self.cfg.eval_batch_size
            val_error = evaluate(self.net, state, self.splits.val, batch_size)
            test_error = evaluate(self.net, state, self.splits.test, batch_size)
            record = MetricsRecord(
                epoch=epoch,
                train_error=train_error,
                val_error=val_error,
                test_error=test_error,
                lr=optimizer.lr,
                state=state,
                wall_time=time.perf_counter() - started,
            )
            result.records.append(record)
            self.log.info(
                f"Epoch {epoch}/{plan.total_epochs} lr {optimizer.lr:.3g} "
                f"state {state.bitstring}: train {train_error:.4f} "
                f"val {val_error:.4f} test {test_error:.4f}"
            )

            eligible = state.all_set or not restrict_to_fully_binarized
            best = result.checkpoint
            if eligible and (best is None or val_error < best.val_error):
                result.checkpoint = Checkpoint(
                    epoch=epoch,
                    state=state,
                    params=self.net.state_dict(),
                    val_error=val_error,
                    test_error=test_error,
                )

        result.wall_time = time.perf_counter() - started
        return result

    def _train_epoch(self, optimizer, state, epoch):
        plan = self.plan
        mistakes = 0
        seen = 0
        for x, y in batches(self.splits.train, plan.batch_size, (plan.seed, epoch)):
            if len(y) == 1 and self._has_batchnorm and self.cfg.skip_singleton_batches:
                self.log.warning(f"Epoch {epoch}: skipping a batch of one example")
                continue
            binarize.apply_binarization(self.net, state)
            loss, grads, logits = self.net.loss_and_gradients(x, y)
            if not np.isfinite(loss):
                raise exc.TrainingDivergedError(epoch=epoch)
            optimizer.step(self.net.parameters(), binarize.ste_route_gradients(grads))
            mistakes += int(np.sum(logits.argmax(axis=1) != y))
            seen += len(y)
        if seen == 0:
            raise exc.DataError(f"Epoch {epoch} saw no training batches")
        return mistakes / seen


def run_iterative(plan, net, data, cfg=None, logger=None):
    """Iteratively binarize net under plan.

    :param data: Splits with train, val and test datasets.
    :return: RunResult with the trained network, one MetricsRecord per epoch and the
        checkpoint with the best validation error among fully binarized epochs (among
        all epochs when the plan never binarizes).
    """
    logger = logger or default_logger
    num_layers = net.num_weight_layers
    if plan.order is not None and len(plan.order) != num_layers:
        raise exc.ConfigurationError(
            f"Order {list(plan.order)} does not cover the network's {num_layers} "
            "weight-bearing layers"
        )
    logger.info(
        f"Training {net.spec.name} ({net.weight_count} weights) order {plan.order_name} "
        f"N={plan.epochs_per_layer} T={plan.total_epochs} lr0={plan.lr0} seed={plan.seed}"
    )

    trainer = Trainer(net, plan, data, cfg=cfg, logger=logger)
    return trainer.run(
        lambda epoch: binarization_state_at(plan, epoch, num_layers),
        restrict_to_fully_binarized=plan.order is not None,
    )
