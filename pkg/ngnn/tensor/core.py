"""
Dense 2-D tensors with reverse-mode automatic differentiation.

Every differentiable operation is a `Function`; applying one records the function on its output
tensor, and `backward` replays the recorded graph in reverse topological order (the `Tape`).
"""
import logging
import threading
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from ngnn.utils.errors import ShapeError

logger = logging.getLogger(__name__)

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, 'grad_enabled', True)


@contextmanager
def no_grad():
    """
    Disable graph recording in the current thread, e.g. for evaluation passes.
    """
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """
    A 2-D real array that may take part in gradient computation.
    """

    def __init__(
            self,
            data: Union[np.ndarray, float, Sequence[float], Sequence[Sequence[float]]],
            requires_grad: bool = False,
            dtype: Optional[np.dtype] = None,
            name: Optional[str] = None,
    ):
        """
        Args:
            data: the values. Scalars become 1x1 and flat sequences become a single row.
            requires_grad: whether gradients are accumulated into `grad` on backward.
            dtype: float32 or float64. Defaults to the array's own float type, else float32.
            name: an optional label, used by parameter registries.
        """
        if dtype is None:
            if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
                dtype = data.dtype
            else:
                dtype = np.float32
        arr = np.asarray(data, dtype=dtype)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim > 2:
            raise ShapeError(f"only 2-D tensors are supported, got shape {arr.shape}")

        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.creator: Optional['Function'] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self.creator is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def detach(self) -> 'Tensor':
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ShapeError(f"gradient shape {grad.shape} does not match tensor shape {self.shape}")
        if self.grad is None:
            self.grad = grad.astype(self.dtype, copy=True)
        else:
            self.grad += grad

    def backward(self) -> None:
        backward(self)

    def __matmul__(self, other: 'Tensor') -> 'Tensor':
        from ngnn.tensor.ops import matmul
        return matmul(self, other)

    def __add__(self, other: 'Tensor') -> 'Tensor':
        from ngnn.tensor.ops import add
        return add(self, other)

    def __mul__(self, other: 'Tensor') -> 'Tensor':
        from ngnn.tensor.ops import mul
        return mul(self, other)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} dtype={self.dtype} requires_grad={self.requires_grad}>"


class Function(ABC):
    """
    Base class of differentiable operations.

    `forward` receives the input arrays (plus non-differentiable keyword arguments such as index
    arrays) and returns the output array; `backward` receives dL/d(output) and returns one
    gradient per input, or None for inputs it does not differentiate.
    """

    def __init__(self, *inputs: Tensor):
        self.inputs = inputs

    @abstractmethod
    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        pass

    @abstractmethod
    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        pass

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs: Any) -> Tensor:
        fn = cls(*inputs)
        out = fn.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
        result = Tensor(out, requires_grad=requires_grad, dtype=out.dtype)
        if requires_grad:
            result.creator = fn
        return result


@dataclass
class Tape:
    """
    The operations reachable from a root tensor, in topological order (inputs before outputs).
    """
    nodes: List[Tensor] = field(default_factory=list)

    @classmethod
    def record(cls, root: Tensor) -> 'Tape':
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node.creator is not None:
                for parent in node.creator.inputs:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)


def backward(loss: Tensor, params: Sequence[Tensor] = ()) -> None:
    """
    Back-propagate from a scalar loss. Every leaf tensor with requires_grad that is reachable from
    the loss gets its gradient accumulated (added to any existing `grad`). Leaves that receive no
    gradient, and any of `params` the loss does not depend on, end with a zero `grad`.
    :param loss: a 1x1 tensor produced by recorded operations.
    :param params: registered parameters, e.g. a model's parameter list.
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar (1x1) loss, got {loss.shape}")
    if loss.requires_grad:
        _propagate(loss)
    for p in params:
        if p.requires_grad and p.grad is None:
            p.zero_grad()


def _propagate(loss: Tensor) -> None:
    tape = Tape.record(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        grad = grads.pop(id(node), None)
        if grad is None:
            if node.creator is None and node.grad is None:
                node.zero_grad()
            continue
        if node.creator is None:
            node.accumulate_grad(grad)
            continue
        input_grads = node.creator.backward(grad)
        for parent, parent_grad in zip(node.creator.inputs, input_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + parent_grad
            else:
                grads[id(parent)] = parent_grad
