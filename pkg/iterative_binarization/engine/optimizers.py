import abc

import numpy as np

from iterative_binarization import constants
from iterative_binarization import exceptions as exc


class Optimizer:
    """Per-parameter state; updates parameter arrays in place.

    :param lr: learning rate, changed between epochs by the schedule.
    """

    def __init__(self, lr):
        self.lr = lr
        self.buffers = {}

    def _buffer(self, name, index, param):
        buffers = self.buffers.setdefault(name, {})
        if index not in buffers:
            buffers[index] = np.zeros_like(param)
        return buffers[index]

    def step(self, params, grads):
        if len(params) != len(grads):
            raise exc.ConfigurationError(
                f"Got {len(grads)} gradients for {len(params)} parameters"
            )
        self._begin_step()
        for index, (param, grad) in enumerate(zip(params, grads)):
            if param.shape != grad.shape:
                raise exc.ConfigurationError(
                    f"Gradient shape {grad.shape} does not match parameter shape {param.shape}"
                )
            self._update(index, param, grad)

    def _begin_step(self):
        pass

    @abc.abstractmethod
    def _update(self, index, param, grad):
        pass


class Adam(Optimizer):
    def __init__(
        self,
        lr,
        beta1=constants.ADAM_BETA1,
        beta2=constants.ADAM_BETA2,
        eps=constants.ADAM_EPS,
    ):
        super().__init__(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def _begin_step(self):
        self.t += 1

    def _update(self, index, param, grad):
        m = self._buffer("m", index, param)
        v = self._buffer("v", index, param)
        m *= self.beta1
        m += (1 - self.beta1) * grad
        v *= self.beta2
        v += (1 - self.beta2) * grad * grad
        m_hat = m / (1 - self.beta1**self.t)
        v_hat = v / (1 - self.beta2**self.t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SgdMomentum(Optimizer):
    """SGD with momentum; weight decay is added to the gradient as an L2 term."""

    def __init__(
        self,
        lr,
        momentum=constants.SGD_MOMENTUM,
        weight_decay=constants.SGD_WEIGHT_DECAY,
    ):
        super().__init__(lr)
        self.momentum = momentum
        self.weight_decay = weight_decay

    def _update(self, index, param, grad):
        velocity = self._buffer("velocity", index, param)
        if self.weight_decay:
            grad = grad + self.weight_decay * param
        velocity *= self.momentum
        velocity += grad
        param -= self.lr * velocity


def build_optimizer(spec, lr):
    """Optimizer for an OptimizerSpec."""
    if spec.kind == constants.OptimizerKind.ADAM:
        return Adam(lr, beta1=spec.beta1, beta2=spec.beta2, eps=spec.eps)
    if spec.kind == constants.OptimizerKind.SGD:
        return SgdMomentum(lr, momentum=spec.momentum, weight_decay=spec.weight_decay)
    raise exc.ConfigurationError(f"Unknown optimizer: {spec.kind!r}")


def optimizer_step(state, params, grads):
    """Apply one update of optimizer `state` to the shadow parameters in place."""
    state.step(params, grads)
    return params
