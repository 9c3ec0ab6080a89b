"""
Immutable CSR graphs and the bipartite message-passing blocks the layers consume.
"""
import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Optional, Set, Tuple, Union

import numpy as np
import scipy.sparse as sp

from ngnn.utils.errors import GraphError

logger = logging.getLogger(__name__)

__all__ = ['Graph', 'Block', 'build_graph', 'gcn_normalize', 'graph_from_pairs']


def _offsets_from_rows(rows: np.ndarray, num_rows: int) -> np.ndarray:
    offsets = np.zeros(num_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=num_rows), out=offsets[1:])
    return offsets


@dataclass(frozen=True, eq=False)
class Block:
    """
    One hop of message passing: edges run from source nodes to destination nodes. The first
    `num_dst` source nodes are the destinations themselves, so a destination's own representation
    is row i of the source features.

    Attributes:
        src_ids: global ids of the source nodes.
        num_dst: number of destination nodes.
        offsets: CSR row offsets over destinations (length num_dst + 1).
        indices: source-local ids of each destination's in-neighbors.
        gcn_coeff: optional per-edge GCN coefficient.
        self_coeff: optional per-destination GCN self-loop coefficient.
    """
    src_ids: np.ndarray
    num_dst: int
    offsets: np.ndarray
    indices: np.ndarray
    gcn_coeff: Optional[np.ndarray] = None
    self_coeff: Optional[np.ndarray] = None

    @property
    def num_src(self) -> int:
        return int(self.src_ids.shape[0])

    @property
    def dst_ids(self) -> np.ndarray:
        return self.src_ids[:self.num_dst]

    @property
    def num_edges(self) -> int:
        return int(self.indices.shape[0])

    @cached_property
    def edge_dst(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_dst, dtype=np.int64), np.diff(self.offsets))

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    @cached_property
    def mean_matrix(self) -> sp.csr_matrix:
        """Row-normalized adjacency; rows of zero-degree destinations stay empty."""
        deg = self.degrees()
        weights = 1.0 / np.maximum(deg, 1)
        values = np.repeat(weights, deg)
        return sp.csr_matrix((values, self.indices, self.offsets), shape=(self.num_dst, self.num_src))

    @cached_property
    def gcn_matrix(self) -> sp.csr_matrix:
        """Normalized adjacency with the virtual self loops added."""
        if self.gcn_coeff is None or self.self_coeff is None:
            raise GraphError("GCN message passing needs a normalized graph, call gcn_normalize first")
        dst = self.edge_dst
        rows = np.concatenate([dst, np.arange(self.num_dst)])
        cols = np.concatenate([self.indices, np.arange(self.num_dst)])
        values = np.concatenate([self.gcn_coeff, self.self_coeff])
        return sp.csr_matrix((values, (rows, cols)), shape=(self.num_dst, self.num_src))

    @cached_property
    def attention_edges(self) -> Tuple[np.ndarray, np.ndarray]:
        """(src, dst) of every edge plus one self loop per destination, grouped by destination."""
        dst = np.concatenate([self.edge_dst, np.arange(self.num_dst)])
        src = np.concatenate([self.indices, np.arange(self.num_dst)])
        order = np.argsort(dst, kind='stable')
        return src[order], dst[order]


@dataclass(frozen=True, eq=False)
class Graph:
    """
    An undirected graph in CSR form: every edge (u, v) is stored in both directions, neighbor
    lists are sorted, self loops are never stored.
    """
    num_nodes: int
    offsets: np.ndarray
    indices: np.ndarray
    gcn_coeff: Optional[np.ndarray] = None
    self_coeff: Optional[np.ndarray] = None

    def __post_init__(self):
        offsets, indices = self.offsets, self.indices
        if offsets.shape[0] != self.num_nodes + 1 or offsets[0] != 0 or offsets[-1] != indices.shape[0]:
            raise GraphError("CSR offsets must have length N+1, start at 0 and end at len(indices)")
        if np.any(np.diff(offsets) < 0):
            raise GraphError("CSR offsets must be non-decreasing")
        if indices.size and (indices.min() < 0 or indices.max() >= self.num_nodes):
            raise GraphError("neighbor ids must lie in [0, N)")
        if self.gcn_coeff is not None and self.gcn_coeff.shape[0] != indices.shape[0]:
            raise GraphError("gcn_coeff needs one value per stored edge")

    @property
    def num_edges(self) -> int:
        """Stored (directed) edge count, 2x the undirected count."""
        return int(self.indices.shape[0])

    @property
    def num_undirected_edges(self) -> int:
        return self.num_edges // 2

    @property
    def is_normalized(self) -> bool:
        return self.gcn_coeff is not None

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.offsets[v]:self.offsets[v + 1]]

    def edge_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())
        return src, self.indices

    def undirected_edges(self) -> np.ndarray:
        """Each undirected edge once, as an (E, 2) array with u < v."""
        src, dst = self.edge_arrays()
        mask = src < dst
        return np.stack([src[mask], dst[mask]], axis=1)

    def edge_set(self) -> Set[Tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.undirected_edges()}

    @cached_property
    def _edge_keys(self) -> np.ndarray:
        src, dst = self.edge_arrays()
        return np.sort(src * self.num_nodes + dst)

    def has_edges(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Vectorized membership test for the pairs (u[i], v[i])."""
        keys = np.asarray(u, dtype=np.int64) * self.num_nodes + np.asarray(v, dtype=np.int64)
        pos = np.searchsorted(self._edge_keys, keys)
        pos = np.minimum(pos, max(self._edge_keys.shape[0] - 1, 0))
        if self._edge_keys.shape[0] == 0:
            return np.zeros(keys.shape, dtype=bool)
        return self._edge_keys[pos] == keys

    def is_symmetric(self) -> bool:
        src, dst = self.edge_arrays()
        return bool(np.all(self.has_edges(dst, src)))

    def adjacency(self) -> sp.csr_matrix:
        values = np.ones(self.num_edges)
        return sp.csr_matrix((values, self.indices, self.offsets), shape=(self.num_nodes, self.num_nodes))

    def to_dense(self) -> np.ndarray:
        return self.adjacency().toarray()

    @cached_property
    def block(self) -> Block:
        """The whole graph as a single message-passing hop (every node is source and destination)."""
        return Block(
            src_ids=np.arange(self.num_nodes, dtype=np.int64),
            num_dst=self.num_nodes,
            offsets=self.offsets,
            indices=self.indices,
            gcn_coeff=self.gcn_coeff,
            self_coeff=self.self_coeff,
        )

    def induced_subgraph(self, nodes: np.ndarray) -> 'Graph':
        """
        The subgraph on `nodes`, relabelled so that nodes[i] becomes node i. Normalization is not
        carried over; call gcn_normalize on the result when needed.
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        local = np.full(self.num_nodes, -1, dtype=np.int64)
        local[nodes] = np.arange(nodes.shape[0])
        src, dst = self.edge_arrays()
        mask = (local[src] >= 0) & (local[dst] >= 0)
        return graph_from_pairs(local[src[mask]], local[dst[mask]], nodes.shape[0])

    def without_normalization(self) -> 'Graph':
        return replace(self, gcn_coeff=None, self_coeff=None)


def graph_from_pairs(src: np.ndarray, dst: np.ndarray, num_nodes: int) -> Graph:
    """
    CSR from directed pairs that are already deduplicated, loop-free and symmetric.
    """
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    return Graph(num_nodes=int(num_nodes), offsets=_offsets_from_rows(src, num_nodes), indices=dst.astype(np.int64))


def build_graph(edge_list: Union[np.ndarray, Iterable[Tuple[int, int]]], num_nodes: int,
                symmetrize: bool = True) -> Graph:
    """
    build_graph: build a CSR graph from an edge list.
    Args:
        edge_list: (u, v) pairs with 0-based endpoints.
        num_nodes: the node count N.
        symmetrize: store the reverse of every edge as well. Without it the pairs are stored as given,
            so the caller must supply both directions.
    Returns:
        the graph, with duplicates and self loops removed and neighbor lists sorted.
    """
    edges = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list, dtype=np.int64)
    edges = edges.reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise GraphError(f"edge endpoint out of range [0, {num_nodes})")

    edges = edges[edges[:, 0] != edges[:, 1]]
    src, dst = edges[:, 0], edges[:, 1]
    if symmetrize:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
    keys = np.unique(src * num_nodes + dst)
    g = graph_from_pairs(keys // num_nodes, keys % num_nodes, num_nodes)
    if not symmetrize and not g.is_symmetric():
        raise GraphError("edge list is not symmetric; pass symmetrize=True or list both directions")
    return g


def gcn_normalize(g: Graph) -> Graph:
    """
    gcn_normalize: attach symmetric GCN coefficients with virtual self loops.
    Edge (u, v) gets 1/sqrt(d~u * d~v) and each self loop 1/d~v, where d~ = degree + 1.
    """
    deg = (g.degrees() + 1).astype(np.float64)
    src, dst = g.edge_arrays()
    coeff = 1.0 / np.sqrt(deg[src] * deg[dst])
    return replace(g, gcn_coeff=coeff, self_coeff=1.0 / deg)
