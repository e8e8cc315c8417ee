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

import copy
import logging

import numpy as np

from iterative_binarization import exceptions as exc
from iterative_binarization.engine import layers as nn_layers
from iterative_binarization.engine.losses import softmax_cross_entropy

default_logger = logging.getLogger(__name__)


class Network:
    """Sequential network instantiated from a NetworkSpec.

    All parameters are kept in floating-point precision (the shadow weights). Parameter
    order is fixed: layer by layer, and within a layer in insertion order
    (weight, bias / gamma, beta).
    """

    def __init__(self, spec, seed=0, dtype=np.float32, logger=None):
        self.log = logger or default_logger
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.layers = [nn_layers.build_layer(layer, dtype=self.dtype) for layer in spec.layers]

        rng = np.random.default_rng(seed)
        for layer in self.layers:
            layer.init_params(rng)
        self._forwarded = False

    @property
    def weight_layers(self):
        return [layer for layer in self.layers if layer.has_weights]

    @property
    def num_weight_layers(self):
        return len(self.weight_layers)

    @property
    def weight_count(self):
        """Number of weights in weight matrices and kernels, biases excluded."""
        return sum(layer.params["weight"].size for layer in self.weight_layers)

    def named_parameters(self):
        return [
            (f"{index}.{name}", value)
            for index, layer in enumerate(self.layers)
            for name, value in layer.params.items()
        ]

    def parameters(self):
        return [value for _, value in self.named_parameters()]

    def gradients(self):
        grads = []
        for index, layer in enumerate(self.layers):
            for name in layer.params:
                if name not in layer.grads:
                    raise exc.UsageError(f"No gradient for parameter {index}.{name}")
                grads.append(layer.grads[name])
        return grads

    def forward(self, x, mode=nn_layers.TRAIN):
        x = np.asarray(x, dtype=self.dtype).reshape((-1, *self.spec.input_shape))
        for layer in self.layers:
            x = layer.forward(x, mode)
        self._forwarded = True
        return x

    def backward(self, loss_grad):
        """Reverse-mode pass from d(loss)/d(logits).

        Weight gradients are with respect to the effective weights used in the last
        forward pass.

        :return: gradients aligned with parameters().
        """
        if not self._forwarded:
            raise exc.UsageError("backward called before forward")
        grad = loss_grad
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return self.gradients()

    def loss_and_gradients(self, x, labels):
        logits = self.forward(x, nn_layers.TRAIN)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        return loss, self.backward(dlogits), logits

    def predict(self, x, batch_size=1000):
        """Class predictions in eval mode, evaluated in fixed-size chunks."""
        predictions = []
        for start in range(0, len(x), batch_size):
            logits = self.forward(x[start : start + batch_size], nn_layers.EVAL)
            predictions.append(logits.argmax(axis=1))
        if not predictions:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(predictions)

    def error_rate(self, x, labels, batch_size=1000):
        if len(labels) == 0:
            raise exc.DataError("Cannot compute an error rate on an empty dataset")
        return float(np.mean(self.predict(x, batch_size) != labels))

    def state_dict(self):
        """Copies of all parameters and batch-norm running statistics."""
        state = {name: value.copy() for name, value in self.named_parameters()}
        for index, layer in enumerate(self.layers):
            for name, value in layer.buffers.items():
                state[f"{index}.{name}"] = value.copy()
        return state

    def load_state_dict(self, state):
        for index, layer in enumerate(self.layers):
            for group in (layer.params, layer.buffers):
                for name, value in group.items():
                    key = f"{index}.{name}"
                    if key not in state:
                        raise exc.ConfigurationError(f"State is missing '{key}'")
                    if state[key].shape != value.shape:
                        raise exc.ConfigurationError(
                            f"State '{key}' has shape {state[key].shape}, expected {value.shape}"
                        )
                    # In place, so views held by optimizers and binarization stay valid
                    value[...] = state[key]

    def astype(self, dtype):
        """Deep copy in another precision, without binarized views or cached activations."""
        clone = copy.deepcopy(self)
        clone.dtype = np.dtype(dtype)
        for layer in clone.layers:
            layer.dtype = clone.dtype
            layer._cache = None
            for group in (layer.params, layer.buffers):
                for name in group:
                    group[name] = group[name].astype(dtype)
            layer.grads = {}
            if layer.has_weights:
                layer.effective_weight = None
        clone._forwarded = False
        return clone


def backward(net, loss_grad):
    """Gradients of every parameter of net, given d(loss)/d(logits)."""
    return net.backward(loss_grad)
