import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ngnn.tensor.core import Tensor
from ngnn.utils.errors import ShapeError

logger = logging.getLogger(__name__)

__all__ = ['OptimizerState', 'adam_step', 'sgd_step', 'Optimizer', 'Adam', 'SGD', 'make_optimizer']


@dataclass
class OptimizerState:
    """
    Hyperparameters plus per-parameter moments. Adam keeps first/second moments, SGD keeps an
    (optional) momentum buffer in `m` and leaves `v` empty.
    """
    lr: float = 0.003
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0
    weight_decay: float = 0.0
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)


def _check(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr: float) -> None:
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"parameter shape {p.shape} does not match gradient shape {g.shape}")


def adam_step(state: OptimizerState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    """
    One bias-corrected Adam update. Advances `state` and returns the updated parameter arrays;
    the input arrays are not modified.
    :param state: the optimizer state; moments are created on the first call.
    :param params: the current parameter values.
    :param grads: the gradients, same shapes as params.
    :return: the new parameter values.
    """
    _check(params, grads, state.lr)
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    elif any(m.shape != p.shape for m, p in zip(state.m, params)) or len(state.m) != len(params):
        raise ShapeError("optimizer moments do not match the parameter shapes")

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if state.weight_decay:
            g = g + state.weight_decay * p
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        updated.append((p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype))
    return updated


def sgd_step(state: OptimizerState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    """
    One SGD update with optional heavy-ball momentum.
    """
    _check(params, grads, state.lr)
    if state.momentum and not state.m:
        state.m = [np.zeros_like(p) for p in params]

    state.step += 1
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if state.weight_decay:
            g = g + state.weight_decay * p
        if state.momentum:
            state.m[i] = state.momentum * state.m[i] + g
            g = state.m[i]
        updated.append((p - state.lr * g).astype(p.dtype))
    return updated


class Optimizer(ABC):

    def __init__(self, params: Sequence[Tensor], state: OptimizerState):
        """
        Optimizer: updates a fixed list of parameter tensors in place.
        Args:
            params: the trainable tensors.
            state: hyperparameters and moments.
        """
        self.params = list(params)
        self.state = state

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def _grads(self) -> List[np.ndarray]:
        # parameters untouched by the last backward have a zero gradient
        return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]

    @abstractmethod
    def update(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
        pass

    def step(self) -> None:
        new_values = self.update([p.data for p in self.params], self._grads())
        for p, value in zip(self.params, new_values):
            p.data[...] = value


class Adam(Optimizer):
    def update(self, params, grads):
        return adam_step(self.state, params, grads)


class SGD(Optimizer):
    def update(self, params, grads):
        return sgd_step(self.state, params, grads)


def make_optimizer(name: str, params: Sequence[Tensor], lr: float, weight_decay: float = 0.0,
                   betas: Optional[Sequence[float]] = None, momentum: float = 0.0) -> Optimizer:
    """
    Build an optimizer by name ('adam' or 'sgd').
    """
    state = OptimizerState(lr=lr, weight_decay=weight_decay, momentum=momentum)
    if betas is not None:
        state.beta1, state.beta2 = betas
    if name == 'adam':
        return Adam(params, state)
    if name == 'sgd':
        return SGD(params, state)
    raise ValueError(f"unknown optimizer '{name}'")
