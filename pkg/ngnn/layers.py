"""
GNN layers (GCN, GraphSage-mean, multi-head GAT) and the NGNN feedforward block that is
inserted after a layer's aggregation/transform.

Layers return the pre-activation output; the model decides which activation follows.
"""
import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ngnn.graph import Block, Graph
from ngnn.tensor import (
    ACTIVATIONS,
    Tensor,
    activation,
    add,
    add_bias,
    concat_cols,
    edge_softmax,
    edge_weighted_sum,
    spmm,
    take_rows,
)
from ngnn.utils.errors import ShapeError

logger = logging.getLogger(__name__)

GAT_NEGATIVE_SLOPE = 0.2

MessageGraph = Union[Graph, Block]

__all__ = [
    'GNNLayer',
    'SageLayer',
    'GcnLayer',
    'GatLayer',
    'NgnnBlock',
    'xavier_uniform',
    'sage_forward',
    'gcn_forward',
    'gat_forward',
    'ngnn_forward',
    'layer_param_count',
]


def as_block(g: MessageGraph) -> Block:
    return g.block if isinstance(g, Graph) else g


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=np.float32,
                   name: Optional[str] = None) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype), requires_grad=True, name=name)


def zeros(rows: int, cols: int, dtype=np.float32, name: Optional[str] = None) -> Tensor:
    return Tensor(np.zeros((rows, cols), dtype=dtype), requires_grad=True, name=name)


def _dst_rows(h: Tensor, block: Block) -> Tensor:
    if block.num_dst == h.rows:
        return h
    return take_rows(h, np.arange(block.num_dst))


class GNNLayer(ABC):

    def __init__(self, in_dim: int, out_dim: int):
        """
        GNNLayer: one round of neighborhood aggregation plus a linear transform.
        Args:
            in_dim: input feature width.
            out_dim: output feature width.
        """
        if in_dim <= 0 or out_dim <= 0:
            raise ShapeError(f"layer widths must be positive, got {in_dim} -> {out_dim}")
        self.in_dim = in_dim
        self.out_dim = out_dim

    @abstractmethod
    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        pass

    @abstractmethod
    def forward(self, g: MessageGraph, h: Tensor) -> Tensor:
        pass

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_params(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def _check_input(self, block: Block, h: Tensor) -> None:
        if h.cols != self.in_dim:
            raise ShapeError(f"{type(self).__name__} expects width {self.in_dim}, got {h.cols}")
        if h.rows != block.num_src:
            raise ShapeError(f"{h.rows} feature rows for {block.num_src} source nodes")

    def __call__(self, g: MessageGraph, h: Tensor) -> Tensor:
        return self.forward(g, h)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.in_dim} -> {self.out_dim})"


class SageLayer(GNNLayer):

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, dtype=np.float32):
        """
        SageLayer: out[v] = h[v] W_self + mean_{u in N(v)} h[u] W_neigh + b.
        """
        super().__init__(in_dim, out_dim)
        self.W_self = xavier_uniform(rng, in_dim, out_dim, dtype, 'W_self')
        self.W_neigh = xavier_uniform(rng, in_dim, out_dim, dtype, 'W_neigh')
        self.b = zeros(1, out_dim, dtype, 'b')

    def named_parameters(self):
        return [('W_self', self.W_self), ('W_neigh', self.W_neigh), ('b', self.b)]

    def forward(self, g: MessageGraph, h: Tensor) -> Tensor:
        block = as_block(g)
        self._check_input(block, h)
        neigh = spmm(block.mean_matrix, h)
        return add_bias(add(_dst_rows(h, block) @ self.W_self, neigh @ self.W_neigh), self.b)


class GcnLayer(GNNLayer):

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, dtype=np.float32):
        """
        GcnLayer: out = A_hat h W + b, with A_hat the normalized adjacency including self loops.
        """
        super().__init__(in_dim, out_dim)
        self.W = xavier_uniform(rng, in_dim, out_dim, dtype, 'W')
        self.b = zeros(1, out_dim, dtype, 'b')

    def named_parameters(self):
        return [('W', self.W), ('b', self.b)]

    def forward(self, g: MessageGraph, h: Tensor) -> Tensor:
        block = as_block(g)
        self._check_input(block, h)
        return add_bias(spmm(block.gcn_matrix, h @ self.W), self.b)


class GatLayer(GNNLayer):

    def __init__(self, in_dim: int, out_dim: int, heads: int, rng: np.random.Generator, dtype=np.float32):
        """
        GatLayer: multi-head graph attention. Each head projects to out_dim/heads columns and
        attends over the in-neighbors plus a self loop; head outputs are concatenated, then the
        bias is added.
        """
        super().__init__(in_dim, out_dim)
        if heads < 1 or out_dim % heads:
            raise ShapeError(f"output width {out_dim} is not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = out_dim // heads
        self.W = [xavier_uniform(rng, in_dim, self.head_dim, dtype, f'W{i}') for i in range(heads)]
        self.a_src = [xavier_uniform(rng, self.head_dim, 1, dtype, f'a_src{i}') for i in range(heads)]
        self.a_dst = [xavier_uniform(rng, self.head_dim, 1, dtype, f'a_dst{i}') for i in range(heads)]
        self.b = zeros(1, out_dim, dtype, 'b')

    def named_parameters(self):
        params = []
        for i in range(self.heads):
            params += [(f'W{i}', self.W[i]), (f'a_src{i}', self.a_src[i]), (f'a_dst{i}', self.a_dst[i])]
        return params + [('b', self.b)]

    def attention(self, g: MessageGraph, h: Tensor) -> Tuple[List[Tensor], List[Tensor]]:
        """
        Per-head attention weights (one per edge, self loops included) and projected features.
        """
        block = as_block(g)
        self._check_input(block, h)
        src, dst = block.attention_edges
        alphas, projected = [], []
        for i in range(self.heads):
            wh = h @ self.W[i]
            score_src = take_rows(wh @ self.a_src[i], src)
            score_dst = take_rows(wh @ self.a_dst[i], dst)
            e = activation(add(score_src, score_dst), 'leaky_relu', slope=GAT_NEGATIVE_SLOPE)
            alphas.append(edge_softmax(e, dst, block.num_dst))
            projected.append(wh)
        return alphas, projected

    def forward(self, g: MessageGraph, h: Tensor) -> Tensor:
        block = as_block(g)
        src, dst = block.attention_edges
        alphas, projected = self.attention(block, h)
        outs = [edge_weighted_sum(alpha, wh, src, dst, block.num_dst) for alpha, wh in zip(alphas, projected)]
        return add_bias(concat_cols(outs), self.b)

    def __repr__(self) -> str:
        return f"GatLayer({self.in_dim} -> {self.out_dim}, heads={self.heads})"


class NgnnBlock:

    def __init__(self, width: int, activations: Sequence[str], rng: np.random.Generator, dtype=np.float32):
        """
        NgnnBlock: k feedforward layers g^i = act_i(g^{i-1} w^i + b^i) applied to a GNN layer's output,
        all square with the host layer's output width.
        Args:
            width: the host layer's output width.
            activations: one activation per feedforward layer; k = len(activations).
            rng: initialization stream.
        """
        if width <= 0:
            raise ShapeError(f"block width must be positive, got {width}")
        unknown = [a for a in activations if a not in ACTIVATIONS]
        if unknown:
            raise ValueError(f"unknown activations {unknown}")
        self.width = width
        self.activations = list(activations)
        self.weights = [xavier_uniform(rng, width, width, dtype, f'w{i + 1}') for i in range(len(activations))]
        self.biases = [zeros(1, width, dtype, f'b{i + 1}') for i in range(len(activations))]

    @property
    def depth(self) -> int:
        return len(self.activations)

    @property
    def final_activation(self) -> Optional[str]:
        return self.activations[-1] if self.activations else None

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params += [(w.name, w), (b.name, b)]
        return params

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_params(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def forward(self, z: Tensor) -> Tensor:
        if z.cols != self.width:
            raise ShapeError(f"NGNN block of width {self.width} got input width {z.cols}")
        g = z
        for w, b, act in zip(self.weights, self.biases, self.activations):
            g = activation(add_bias(g @ w, b), act)
        return g

    def __call__(self, z: Tensor) -> Tensor:
        return self.forward(z)

    def __repr__(self) -> str:
        return f"NgnnBlock(width={self.width}, activations={self.activations})"


def sage_forward(layer: SageLayer, g: MessageGraph, h: Tensor) -> Tensor:
    return layer.forward(g, h)


def gcn_forward(layer: GcnLayer, g: MessageGraph, h: Tensor) -> Tensor:
    return layer.forward(g, h)


def gat_forward(layer: GatLayer, g: MessageGraph, h: Tensor) -> Tensor:
    return layer.forward(g, h)


def ngnn_forward(block: NgnnBlock, z: Tensor) -> Tensor:
    return block.forward(z)


def layer_param_count(layer: Union[GNNLayer, NgnnBlock]) -> int:
    """Trainable scalars of a layer or NGNN block, biases included."""
    return layer.num_params()
