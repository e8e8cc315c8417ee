from .layers import (
    batchnorm_forward,
    conv2d_forward,
    dense_forward,
)

from .losses import (
    softmax_cross_entropy,
)

from .initializers import (
    he_init,
)

from .network import (
    Network,
    backward,
)

from .optimizers import (
    Adam,
    SgdMomentum,
    build_optimizer,
    optimizer_step,
)

from .gradcheck import (
    finite_diff_grad,
    relative_error,
)

__all__ = (
    "Adam",
    "Network",
    "SgdMomentum",
    "backward",
    "batchnorm_forward",
    "build_optimizer",
    "conv2d_forward",
    "dense_forward",
    "finite_diff_grad",
    "he_init",
    "optimizer_step",
    "relative_error",
    "softmax_cross_entropy",
)
