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

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization.engine import initializers

TRAIN = "train"
EVAL = "eval"


def _shape_error(msg):
    raise exc.ConfigurationError(msg)


def dense_forward(x, W, b):
    """y[n, o] = sum_i W[o, i] * x[n, i] + b[o]."""
    if x.ndim != 2 or W.ndim != 2 or x.shape[1] != W.shape[1]:
        _shape_error(f"Dense shape mismatch: input {x.shape}, weight {W.shape}")
    if b.shape != (W.shape[0],):
        _shape_error(f"Dense shape mismatch: weight {W.shape}, bias {b.shape}")
    return x @ W.T + b


def dense_backward(dout, x, W):
    """Return (dx, dW, db) for dense_forward."""
    return dout @ W, dout.T @ x, dout.sum(axis=0)


def conv_output_size(size, kernel, stride, pad):
    span = size + 2 * pad - kernel
    if span < 0 or span % stride:
        _shape_error(
            f"Conv2d output size ({size} + 2*{pad} - {kernel})/{stride} + 1 "
            "is not a positive integer"
        )
    return span // stride + 1


def _conv_windows(x, kernel, stride, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    # (n, c, h', w', k, k) view over the padded input
    windows = sliding_window_view(xp, (kernel, kernel), axis=(2, 3))
    return xp, windows[:, :, ::stride, ::stride]


def conv2d_forward(x, K, b, stride=1, pad=0):
    """Cross-correlation of x[n, c_in, h, w] with K[c_out, c_in, k, k], zero padded."""
    if x.ndim != 4 or K.ndim != 4 or K.shape[2] != K.shape[3]:
        _shape_error(f"Conv2d shape mismatch: input {x.shape}, kernel {K.shape}")
    if x.shape[1] != K.shape[1]:
        _shape_error(f"Conv2d channel mismatch: input {x.shape}, kernel {K.shape}")
    if b.shape != (K.shape[0],):
        _shape_error(f"Conv2d shape mismatch: kernel {K.shape}, bias {b.shape}")
    kernel = K.shape[2]
    conv_output_size(x.shape[2], kernel, stride, pad)
    conv_output_size(x.shape[3], kernel, stride, pad)

    _, windows = _conv_windows(x, kernel, stride, pad)
    out = np.tensordot(windows, K, axes=([1, 4, 5], [1, 2, 3]))
    return out.transpose(0, 3, 1, 2) + b[None, :, None, None]


def conv2d_backward(dout, x, K, stride=1, pad=0):
    """Return (dx, dK, db) for conv2d_forward."""
    kernel = K.shape[2]
    xp, windows = _conv_windows(x, kernel, stride, pad)
    out_h, out_w = dout.shape[2], dout.shape[3]

    dK = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))

    dxp = np.zeros_like(xp)
    for i in range(kernel):
        for j in range(kernel):
            contrib = np.tensordot(dout, K[:, :, i, j], axes=([1], [0]))
            dxp[
                :,
                :,
                i : i + stride * (out_h - 1) + 1 : stride,
                j : j + stride * (out_w - 1) + 1 : stride,
            ] += contrib.transpose(0, 3, 1, 2)
    height, width = x.shape[2], x.shape[3]
    return dxp[:, :, pad : pad + height, pad : pad + width], dK, db


def _feature_axes(x):
    # Dense activations are (n, f); conv activations are (n, c, h, w)
    return (0,) if x.ndim == 2 else (0, 2, 3)


def _broadcast(v, ndim):
    return v if ndim == 2 else v[None, :, None, None]


def batchnorm_forward(
    x,
    gamma,
    beta,
    running_stats,
    mode=TRAIN,
    momentum=constants.BATCHNORM_MOMENTUM,
    eps=constants.BATCHNORM_EPS,
):
    """Batch normalization over the feature axis (axis 1).

    In train mode the batch statistics normalize x and running_stats ("mean", "var")
    are updated in place by an exponential moving average. In eval mode the running
    statistics are used instead.

    :return: (y, cache) where cache is needed by batchnorm_backward.
    """
    if x.ndim not in (2, 4) or x.shape[1] != gamma.shape[0] or beta.shape != gamma.shape:
        _shape_error(f"BatchNorm shape mismatch: input {x.shape}, gamma {gamma.shape}")

    axes = _feature_axes(x)
    if mode == TRAIN:
        count = x.size // x.shape[1]
        if count < 2:
            raise exc.DegenerateVarianceError(
                "BatchNorm in train mode needs more than one value per feature"
            )
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        unbiased = var * (count / (count - 1))
        running_stats["mean"] *= 1 - momentum
        running_stats["mean"] += momentum * mean
        running_stats["var"] *= 1 - momentum
        running_stats["var"] += momentum * unbiased
    elif mode == EVAL:
        mean = running_stats["mean"]
        var = running_stats["var"]
    else:
        raise exc.UsageError(f"Unknown batch-norm mode: {mode!r}")

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - _broadcast(mean, x.ndim)) * _broadcast(inv_std, x.ndim)
    y = xhat * _broadcast(gamma, x.ndim) + _broadcast(beta, x.ndim)
    return y.astype(x.dtype, copy=False), (xhat, inv_std, gamma, mode)


def batchnorm_backward(dout, cache):
    """Return (dx, dgamma, dbeta) for batchnorm_forward."""
    xhat, inv_std, gamma, mode = cache
    axes = _feature_axes(dout)
    ndim = dout.ndim

    dgamma = (dout * xhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dxhat = dout * _broadcast(gamma, ndim)
    if mode == EVAL:
        return dxhat * _broadcast(inv_std, ndim), dgamma, dbeta

    count = dout.size // dout.shape[1]
    sum_dxhat = _broadcast(dxhat.sum(axis=axes), ndim)
    sum_dxhat_xhat = _broadcast((dxhat * xhat).sum(axis=axes), ndim)
    dx = (count * dxhat - sum_dxhat - xhat * sum_dxhat_xhat) * _broadcast(inv_std / count, ndim)
    return dx, dgamma, dbeta


class Layer:
    """Sequential layer caching what backward needs from the last forward."""

    has_weights = False

    def __init__(self, spec, dtype=np.float32):
        self.spec = spec
        self.dtype = dtype
        self.params = {}
        self.grads = {}
        self.buffers = {}
        self._cache = None

    @abc.abstractmethod
    def _forward(self, x, mode):
        pass

    @abc.abstractmethod
    def _backward(self, dout, cache):
        pass

    def forward(self, x, mode=TRAIN):
        y, self._cache = self._forward(x, mode)
        return y

    def backward(self, dout):
        if self._cache is None:
            raise exc.UsageError(
                f"{type(self).__name__}.backward called before forward; no cached input"
            )
        return self._backward(dout, self._cache)

    def init_params(self, rng):
        pass

    def __repr__(self):
        return f"{type(self).__name__}({self.spec})"


class WeightedLayer(Layer):
    """Layer with a 'weight' shadow array and a float 'bias'.

    effective_weight is the array forward propagation uses; None means the shadow
    itself. Gradients stored under grads["weight"] are with respect to the effective
    weight.
    """

    has_weights = True

    def __init__(self, spec, dtype=np.float32):
        super().__init__(spec, dtype)
        self.effective_weight = None

    def init_params(self, rng):
        self.params["weight"] = initializers.he_init(self.spec, rng, dtype=self.dtype)
        self.params["bias"] = initializers.zero_bias(self.spec, dtype=self.dtype)

    @property
    def weight_for_forward(self):
        if self.effective_weight is None:
            return self.params["weight"]
        return self.effective_weight


class Dense(WeightedLayer):
    def _forward(self, x, mode):
        W = self.weight_for_forward
        return dense_forward(x, W, self.params["bias"]), (x, W)

    def _backward(self, dout, cache):
        x, W = cache
        dx, self.grads["weight"], self.grads["bias"] = dense_backward(dout, x, W)
        return dx


class Conv2d(WeightedLayer):
    def _forward(self, x, mode):
        W = self.weight_for_forward
        y = conv2d_forward(x, W, self.params["bias"], self.spec.stride, self.spec.pad)
        return y, (x, W)

    def _backward(self, dout, cache):
        x, W = cache
        dx, self.grads["weight"], self.grads["bias"] = conv2d_backward(
            dout, x, W, self.spec.stride, self.spec.pad
        )
        return dx


class BatchNorm(Layer):
    def init_params(self, rng):
        features = self.spec.features
        self.params["gamma"] = np.ones(features, dtype=self.dtype)
        self.params["beta"] = np.zeros(features, dtype=self.dtype)
        self.buffers["running_mean"] = np.zeros(features, dtype=self.dtype)
        self.buffers["running_var"] = np.ones(features, dtype=self.dtype)

    def _forward(self, x, mode):
        running_stats = {"mean": self.buffers["running_mean"], "var": self.buffers["running_var"]}
        return batchnorm_forward(x, self.params["gamma"], self.params["beta"], running_stats, mode)

    def _backward(self, dout, cache):
        dx, self.grads["gamma"], self.grads["beta"] = batchnorm_backward(dout, cache)
        return dx


class ReLU(Layer):
    def _forward(self, x, mode):
        mask = x > 0
        return x * mask, mask

    def _backward(self, dout, mask):
        return dout * mask


class Flatten(Layer):
    def _forward(self, x, mode):
        return x.reshape(x.shape[0], -1), x.shape

    def _backward(self, dout, shape):
        return dout.reshape(shape)


LAYER_CLASSES = {
    "dense": Dense,
    "conv2d": Conv2d,
    "batchnorm": BatchNorm,
    "relu": ReLU,
    "flatten": Flatten,
}


def build_layer(spec, dtype=np.float32):
    return LAYER_CLASSES[spec.kind](spec, dtype=dtype)
