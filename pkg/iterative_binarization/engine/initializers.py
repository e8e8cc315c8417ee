import numpy as np

from iterative_binarization import exceptions as exc


def he_init(spec, rng, dtype=np.float32):
    """Zero-mean normal weights with variance 2 / fan_in."""
    if not spec.has_weights:
        raise exc.ConfigurationError(f"Layer '{spec.kind}' has no weights to initialize")
    std = np.sqrt(2.0 / spec.fan_in)
    return rng.normal(0.0, std, size=spec.weight_shape).astype(dtype)


def zero_bias(spec, dtype=np.float32):
    return np.zeros(spec.weight_shape[0], dtype=dtype)
