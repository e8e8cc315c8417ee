from .dataset import (
    Dataset,
    Splits,
    batches,
    normalize_images,
    split,
)

from .mnist import (
    MnistLoader,
)

__all__ = (
    "Dataset",
    "MnistLoader",
    "Splits",
    "batches",
    "normalize_images",
    "split",
)
