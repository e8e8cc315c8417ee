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

"""Sign binarization of weight tensors over floating-point shadow weights.

Only weight matrices and convolution kernels are binarized. Biases and batch-norm
parameters always stay in floating-point precision. Shadow weights are never clipped.
"""

import logging

import attr
import numpy as np

from iterative_binarization import exceptions as exc

default_logger = logging.getLogger(__name__)


@attr.s(frozen=True)
class BinarizationState:
    """Per weight-bearing layer flags; flags[i] is True when layer i+1 is binarized."""

    flags = attr.ib(converter=lambda flags: tuple(bool(f) for f in flags))

    @classmethod
    def zeros(cls, num_layers):
        return cls([False] * num_layers)

    @classmethod
    def ones(cls, num_layers):
        return cls([True] * num_layers)

    @classmethod
    def onehot(cls, num_layers, layer):
        """State with only `layer` (1-based) binarized."""
        return cls.zeros(num_layers).with_layer(layer)

    @classmethod
    def from_layers(cls, num_layers, layers):
        state = cls.zeros(num_layers)
        for layer in layers:
            state = state.with_layer(layer)
        return state

    @classmethod
    def from_bitstring(cls, bits):
        if any(bit not in "01" for bit in bits):
            raise exc.ConfigurationError(f"Invalid binarization bitstring: '{bits}'")
        return cls([bit == "1" for bit in bits])

    def with_layer(self, layer):
        if not 1 <= layer <= len(self.flags):
            raise exc.ConfigurationError(
                f"Layer {layer} out of range for {len(self.flags)} weight-bearing layers"
            )
        flags = list(self.flags)
        flags[layer - 1] = True
        return BinarizationState(flags)

    @property
    def bitstring(self):
        return "".join("1" if flag else "0" for flag in self.flags)

    @property
    def count(self):
        return sum(self.flags)

    @property
    def all_set(self):
        return all(self.flags)

    @property
    def layers(self):
        """1-based indices of binarized layers."""
        return tuple(i + 1 for i, flag in enumerate(self.flags) if flag)

    def issubset(self, other):
        return len(self) == len(other) and all(b or not a for a, b in zip(self.flags, other.flags))

    def __len__(self):
        return len(self.flags)


@attr.s(slots=True)
class ShadowView:
    """Shadow is the float master copy; effective is what forward propagation uses."""

    shadow = attr.ib()
    effective = attr.ib()
    binarized = attr.ib(default=False)


def binarize_sign(w):
    """Elementwise sign with sign(0) = +1; output is only -1.0 or +1.0."""
    w = np.asarray(w)
    return np.where(w >= 0, 1.0, -1.0).astype(w.dtype if w.dtype.kind == "f" else np.float64)


def quantization_error(w):
    """Residual w - sign(w), so that sign(w) = w - quantization_error(w).

    Computed at no less than 64-bit precision, which makes the reconstruction
    sign(w) + error exact for float32 weights.
    """
    w = np.asarray(w)
    wide = w.astype(np.result_type(w.dtype, np.float64))
    return wide - binarize_sign(w)


def apply_binarization(net, state, logger=None):
    """Point every weight-bearing layer of net at its effective weights for state.

    Flagged layers forward-propagate with sign(shadow); the others use the shadow array
    itself. Shadow arrays are never modified.

    :return: list of ShadowView, one per weight-bearing layer.
    """
    logger = logger or default_logger
    layers = net.weight_layers
    if len(state) != len(layers):
        raise exc.ConfigurationError(
            f"Binarization state has {len(state)} flags but network has {len(layers)} "
            "weight-bearing layers"
        )

    views = []
    for layer, flag in zip(layers, state.flags):
        shadow = layer.params["weight"]
        effective = binarize_sign(shadow) if flag else shadow
        layer.effective_weight = effective
        views.append(ShadowView(shadow=shadow, effective=effective, binarized=flag))
    logger.debug(f"Applied binarization state {state.bitstring}")
    return views


def ste_route_gradients(grads_wrt_effective):
    """Straight-through estimator: the sign function is the identity in backward.

    Gradients computed with respect to the effective (possibly binary) weights are the
    gradients of the shadow weights, unchanged.
    """
    return list(grads_wrt_effective)
