"""Central finite-difference gradient oracle, evaluated in 64-bit precision."""

import numpy as np

from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization.engine import layers as nn_layers
from iterative_binarization.engine.losses import softmax_cross_entropy


def _loss(net, x, labels):
    logits = net.forward(x, nn_layers.TRAIN)
    loss, _ = softmax_cross_entropy(logits, labels)
    return loss


def finite_diff_grad(net, batch, param_index, h=constants.DEFAULT_GRADCHECK_STEP, indices=None):
    """Estimate d(loss)/d(param) by (loss(p + h) - loss(p - h)) / 2h per element.

    The estimate is computed on a float64 copy of net; net itself is not modified.
    Binarized views are not carried over, so the float network is differentiated.

    :param batch: (x, labels) tuple, loss is softmax cross-entropy in train mode.
    :param param_index: index into net.parameters().
    :param indices: optional flat element indices; when given only those elements
        are estimated and a 1-d array is returned.
    """
    if not h > 0:
        raise exc.ConfigurationError(f"Finite-difference step must be positive, got {h}")
    x, labels = batch
    probe = net.astype(np.float64)
    param = probe.parameters()[param_index]
    flat = param.reshape(-1)

    if indices is None:
        positions = range(flat.size)
    else:
        positions = np.asarray(indices, dtype=np.int64)

    estimates = []
    for position in positions:
        original = flat[position]
        flat[position] = original + h
        plus = _loss(probe, x, labels)
        flat[position] = original - h
        minus = _loss(probe, x, labels)
        flat[position] = original
        estimates.append((plus - minus) / (2 * h))

    estimates = np.asarray(estimates, dtype=np.float64)
    if indices is None:
        return estimates.reshape(param.shape)
    return estimates


def relative_error(analytic, numeric):
    """Norm-wise relative difference ||a - n|| / max(||a||, ||n||)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)
