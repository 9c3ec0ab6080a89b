"""
Differentiable operations on 2-D tensors: dense algebra, activations, sparse message passing
primitives and the two training losses.
"""
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, logsumexp

from ngnn.tensor.core import Function, Tensor
from ngnn.utils.errors import ShapeError

ACTIVATIONS = ('relu', 'sigmoid', 'identity', 'tanh', 'elu', 'leaky_relu')

__all__ = [
    'ACTIVATIONS',
    'matmul',
    'add',
    'mul',
    'scale',
    'add_bias',
    'activation',
    'relu',
    'sigmoid',
    'dropout',
    'spmm',
    'take_rows',
    'concat_cols',
    'edge_softmax',
    'edge_weighted_sum',
    'reduce_sum',
    'sum_cols',
    'softmax_cross_entropy',
    'binary_cross_entropy_with_logits',
    'pairs_dot',
]


class MatMul(Function):
    def forward(self, a, b):
        return a @ b

    def backward(self, grad):
        a, b = self.inputs
        return grad @ b.data.T, a.data.T @ grad


class Add(Function):
    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        return grad, grad


class Mul(Function):
    def forward(self, a, b):
        return a * b

    def backward(self, grad):
        a, b = self.inputs
        return grad * b.data, grad * a.data


class Scale(Function):
    def forward(self, x, factor=1.0):
        self.factor = factor
        return x * x.dtype.type(factor)

    def backward(self, grad):
        return (grad * grad.dtype.type(self.factor),)


class AddBias(Function):
    def forward(self, x, b):
        return x + b

    def backward(self, grad):
        return grad, grad.sum(axis=0, keepdims=True)


class Activation(Function):
    def forward(self, x, kind='relu', slope=0.2):
        self.kind = kind
        self.slope = slope
        if kind == 'identity':
            out = x.copy()
        elif kind == 'relu':
            out = np.maximum(x, 0)
        elif kind == 'sigmoid':
            out = expit(x)
        elif kind == 'tanh':
            out = np.tanh(x)
        elif kind == 'elu':
            out = np.where(x > 0, x, np.expm1(np.minimum(x, 0)))
        else:
            out = np.where(x > 0, x, x * x.dtype.type(slope))
        self.out = out
        return out

    def backward(self, grad):
        x = self.inputs[0].data
        if self.kind == 'identity':
            return (grad,)
        if self.kind == 'relu':
            # subgradient at 0 is 0
            return (grad * (x > 0),)
        if self.kind == 'sigmoid':
            return (grad * self.out * (1 - self.out),)
        if self.kind == 'tanh':
            return (grad * (1 - self.out * self.out),)
        if self.kind == 'elu':
            return (grad * np.where(x > 0, 1, self.out + 1),)
        return (grad * np.where(x > 0, 1, x.dtype.type(self.slope)),)


class Dropout(Function):
    def forward(self, x, p=0.0, rng=None):
        keep = 1.0 - p
        self.mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
        return x * self.mask

    def backward(self, grad):
        return (grad * self.mask,)


class SpMM(Function):
    def forward(self, x, matrix=None):
        self.matrix = matrix
        return np.asarray(matrix @ x, dtype=x.dtype)

    def backward(self, grad):
        return (np.asarray(self.matrix.T @ grad, dtype=grad.dtype),)


class TakeRows(Function):
    def forward(self, x, index=None):
        self.index = index
        self.num_rows = x.shape[0]
        return x[index]

    def backward(self, grad):
        out = np.zeros((self.num_rows, grad.shape[1]), dtype=grad.dtype)
        np.add.at(out, self.index, grad)
        return (out,)


class ConcatCols(Function):
    def forward(self, *xs):
        self.widths = [x.shape[1] for x in xs]
        return np.concatenate(xs, axis=1)

    def backward(self, grad):
        bounds = np.cumsum(self.widths)[:-1]
        return tuple(np.split(grad, bounds, axis=1))


class EdgeSoftmax(Function):
    """
    Softmax of per-edge scores over the incoming edges of each destination node.
    """

    def forward(self, scores, dst=None, num_dst=0):
        self.dst = dst
        self.num_dst = num_dst
        e = scores[:, 0]
        seg_max = np.full(num_dst, -np.inf, dtype=scores.dtype)
        np.maximum.at(seg_max, dst, e)
        ex = np.exp(e - seg_max[dst])
        seg_sum = np.bincount(dst, weights=ex, minlength=num_dst).astype(scores.dtype)
        alpha = (ex / seg_sum[dst]).astype(scores.dtype)
        self.alpha = alpha
        return alpha.reshape(-1, 1)

    def backward(self, grad):
        g = grad[:, 0]
        weighted = np.bincount(self.dst, weights=self.alpha * g, minlength=self.num_dst)
        out = self.alpha * (g - weighted[self.dst])
        return (out.reshape(-1, 1).astype(grad.dtype),)


class EdgeWeightedSum(Function):
    """
    out[v] = sum over edges e=(u, v) of weight[e] * x[u].
    """

    def forward(self, weights, x, src=None, dst=None, num_dst=0):
        self.src = src
        self.dst = dst
        self.matrix = sp.csr_matrix((weights[:, 0], (dst, src)), shape=(num_dst, x.shape[0]))
        return np.asarray(self.matrix @ x, dtype=x.dtype)

    def backward(self, grad):
        x = self.inputs[1].data
        d_weights = np.einsum('ij,ij->i', grad[self.dst], x[self.src]).reshape(-1, 1)
        d_x = np.asarray(self.matrix.T @ grad, dtype=grad.dtype)
        return d_weights.astype(grad.dtype), d_x


class ReduceSum(Function):
    def forward(self, x):
        return np.array([[x.sum()]], dtype=x.dtype)

    def backward(self, grad):
        return (np.full(self.inputs[0].shape, grad[0, 0], dtype=grad.dtype),)


class SumCols(Function):
    def forward(self, x):
        return x.sum(axis=1, keepdims=True)

    def backward(self, grad):
        return (np.broadcast_to(grad, self.inputs[0].shape).copy(),)


class SoftmaxCrossEntropy(Function):
    def forward(self, logits, labels=None):
        m = logits.shape[0]
        lse = logsumexp(logits, axis=1)
        self.labels = labels
        self.probs = np.exp(logits - lse[:, None])
        loss = np.mean(lse - logits[np.arange(m), labels])
        return np.array([[loss]], dtype=logits.dtype)

    def backward(self, grad):
        m = self.probs.shape[0]
        d = self.probs.copy()
        d[np.arange(m), self.labels] -= 1
        return ((d / m * grad[0, 0]).astype(grad.dtype),)


class BCEWithLogits(Function):
    def forward(self, scores, targets=None):
        self.targets = targets
        s = scores[:, 0]
        loss = np.mean(np.logaddexp(0, s) - targets * s)
        return np.array([[loss]], dtype=scores.dtype)

    def backward(self, grad):
        s = self.inputs[0].data[:, 0]
        d = (expit(s) - self.targets) / s.shape[0] * grad[0, 0]
        return (d.reshape(-1, 1).astype(grad.dtype),)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ShapeError(message)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _require(a.cols == b.rows, f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    return MatMul.apply(a, b)


def add(a: Tensor, b: Tensor) -> Tensor:
    _require(a.shape == b.shape, f"add needs equal shapes, got {a.shape} and {b.shape}")
    return Add.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require(a.shape == b.shape, f"mul needs equal shapes, got {a.shape} and {b.shape}")
    return Mul.apply(a, b)


def scale(x: Tensor, factor: float) -> Tensor:
    return Scale.apply(x, factor=factor)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    _require(b.rows == 1 and b.cols == x.cols, f"bias shape {b.shape} does not fit input {x.shape}")
    return AddBias.apply(x, b)


def activation(x: Tensor, kind: str, slope: float = 0.2) -> Tensor:
    """
    Elementwise activation: relu, sigmoid, identity, tanh, elu or leaky_relu (negative `slope`).
    """
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown activation '{kind}', expected one of {ACTIVATIONS}")
    return Activation.apply(x, kind=kind, slope=slope)


def relu(x: Tensor) -> Tensor:
    return activation(x, 'relu')


def sigmoid(x: Tensor) -> Tensor:
    return activation(x, 'sigmoid')


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator], training: bool = True) -> Tensor:
    """
    Inverted dropout: at train time each entry is zeroed with probability p and survivors are scaled
    by 1/(1-p). Identity in eval mode or when p == 0.
    """
    if not training or p <= 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if rng is None:
        raise ValueError("dropout at train time needs a random generator")
    return Dropout.apply(x, p=p, rng=rng)


def spmm(matrix: sp.spmatrix, x: Tensor) -> Tensor:
    """
    Sparse (constant) matrix times dense tensor.
    """
    _require(matrix.shape[1] == x.rows, f"spmm: matrix {matrix.shape} cannot multiply {x.shape}")
    return SpMM.apply(x, matrix=sp.csr_matrix(matrix, dtype=x.dtype))


def take_rows(x: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    if index.size:
        _require(index.min() >= 0 and index.max() < x.rows, f"row index out of range for {x.shape}")
    return TakeRows.apply(x, index=index)


def concat_cols(xs: Sequence[Tensor]) -> Tensor:
    _require(len(xs) > 0, "concat_cols needs at least one tensor")
    _require(len({x.rows for x in xs}) == 1, "concat_cols needs equal row counts")
    if len(xs) == 1:
        return xs[0]
    return ConcatCols.apply(*xs)


def edge_softmax(scores: Tensor, dst: np.ndarray, num_dst: int) -> Tensor:
    _require(scores.cols == 1 and scores.rows == len(dst), "edge_softmax needs one score per edge")
    return EdgeSoftmax.apply(scores, dst=np.asarray(dst, dtype=np.int64), num_dst=num_dst)


def edge_weighted_sum(weights: Tensor, x: Tensor, src: np.ndarray, dst: np.ndarray, num_dst: int) -> Tensor:
    _require(weights.cols == 1 and weights.rows == len(src) == len(dst), "edge_weighted_sum needs one weight per edge")
    return EdgeWeightedSum.apply(weights, x, src=np.asarray(src, dtype=np.int64),
                                 dst=np.asarray(dst, dtype=np.int64), num_dst=num_dst)


def reduce_sum(x: Tensor) -> Tensor:
    return ReduceSum.apply(x)


def sum_cols(x: Tensor) -> Tensor:
    return SumCols.apply(x)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """
    Mean negative log-likelihood of integer class labels under softmax(logits).
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    _require(logits.rows > 0, "softmax_cross_entropy needs at least one row")
    _require(labels.shape[0] == logits.rows, f"{labels.shape[0]} labels for {logits.rows} rows")
    if labels.min() < 0 or labels.max() >= logits.cols:
        raise ValueError(f"labels must lie in [0, {logits.cols})")
    return SoftmaxCrossEntropy.apply(logits, labels=labels)


def binary_cross_entropy_with_logits(scores: Tensor, targets: np.ndarray) -> Tensor:
    """
    Mean binary cross entropy of {0, 1} targets given raw scores, computed through softplus.
    """
    targets = np.asarray(targets, dtype=scores.dtype).reshape(-1)
    _require(scores.cols == 1 and scores.rows == targets.shape[0] and scores.rows > 0,
             f"binary_cross_entropy_with_logits: scores {scores.shape} vs {targets.shape[0]} targets")
    return BCEWithLogits.apply(scores, targets=targets)


def pairs_dot(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise dot products: an (m x 1) tensor."""
    return sum_cols(mul(a, b))
