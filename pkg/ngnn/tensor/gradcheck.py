from typing import Callable

import numpy as np

from ngnn.tensor.core import Tensor, no_grad

__all__ = ['finite_diff_check']


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-6, floor: float = 1e-4) -> float:
    """
    Compare the autodiff gradient of a scalar function with central finite differences.
    :param f: maps x to a 1x1 tensor; may close over other tensors.
    :param x: the point; its data is perturbed in place and restored.
    :param h: the finite-difference step.
    :param floor: lower bound of the relative-error denominator, so near-zero gradients are
                  compared in absolute terms.
    :return: the maximum relative error over all coordinates.
    """
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")

    x.requires_grad = True
    x.grad = None
    f(x).backward()
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(x.data)

    numeric = np.zeros_like(x.data)
    with no_grad():
        for idx in np.ndindex(*x.shape):
            original = x.data[idx]
            x.data[idx] = original + h
            plus = f(x).item()
            x.data[idx] = original - h
            minus = f(x).item()
            x.data[idx] = original
            numeric[idx] = (plus - minus) / (2 * h)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if x.data.size else 0.0
