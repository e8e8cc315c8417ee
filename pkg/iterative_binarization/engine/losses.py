import numpy as np

from iterative_binarization import exceptions as exc


def softmax_cross_entropy(logits, labels):
    """Mean negative log-softmax of the true class.

    :return: (loss, dlogits) with dlogits = (softmax - onehot) / batch.
    """
    labels = np.asarray(labels)
    batch, classes = logits.shape
    if labels.shape != (batch,):
        raise exc.DataError(f"Expected {batch} labels, got shape {labels.shape}")
    if labels.dtype.kind not in "iu":
        raise exc.DataError(f"Labels must be integers, got dtype {labels.dtype}")
    if batch and (labels.min() < 0 or labels.max() >= classes):
        raise exc.DataError(
            f"Labels must be in [0, {classes}), got range [{labels.min()}, {labels.max()}]"
        )

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    loss = float(np.mean(log_norm - shifted[rows, labels]))

    dlogits = np.exp(shifted - log_norm[:, None])
    dlogits[rows, labels] -= 1
    dlogits /= batch
    return loss, dlogits.astype(logits.dtype, copy=False)
