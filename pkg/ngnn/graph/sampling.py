"""
Mini-batch structures: neighbor-sampled blocks, cluster partitions and negative edges.
"""
import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ngnn.graph.graph import Block, Graph
from ngnn.utils.errors import GraphError

logger = logging.getLogger(__name__)

__all__ = ['SampledBlock', 'neighbor_sample', 'cluster_partition', 'negative_sample_edges', 'count_non_edges']

# enumerate candidate pairs directly below this many node pairs
_ENUMERATE_LIMIT = 2_000_000


@dataclass
class SampledBlock:
    """
    The per-hop computation structure of a mini-batch, ordered from the input hop to the output hop.
    """
    blocks: List[Block]

    @property
    def num_hops(self) -> int:
        return len(self.blocks)

    @property
    def input_ids(self) -> np.ndarray:
        return self.blocks[0].src_ids

    @property
    def seeds(self) -> np.ndarray:
        return self.blocks[-1].dst_ids


def _sample_hop(g: Graph, dst_ids: np.ndarray, fanout: Optional[int], rng: np.random.Generator) -> Block:
    local: Dict[int, int] = {int(v): i for i, v in enumerate(dst_ids)}
    src_ids: List[int] = [int(v) for v in dst_ids]
    counts = np.zeros(dst_ids.shape[0], dtype=np.int64)
    picked_pos: List[np.ndarray] = []

    for i, v in enumerate(dst_ids):
        start, end = g.offsets[v], g.offsets[v + 1]
        degree = end - start
        if fanout is None or fanout < 0 or fanout >= degree:
            pos = np.arange(start, end)
        else:
            pos = start + np.sort(rng.choice(degree, size=fanout, replace=False))
        picked_pos.append(pos)
        counts[i] = pos.shape[0]

    pos = np.concatenate(picked_pos) if picked_pos else np.zeros(0, dtype=np.int64)
    neighbors = g.indices[pos]
    indices = np.empty(neighbors.shape[0], dtype=np.int64)
    for j, u in enumerate(neighbors):
        u = int(u)
        idx = local.get(u)
        if idx is None:
            idx = len(src_ids)
            local[u] = idx
            src_ids.append(u)
        indices[j] = idx

    offsets = np.zeros(dst_ids.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return Block(
        src_ids=np.asarray(src_ids, dtype=np.int64),
        num_dst=int(dst_ids.shape[0]),
        offsets=offsets,
        indices=indices,
        gcn_coeff=None if g.gcn_coeff is None else g.gcn_coeff[pos],
        self_coeff=None if g.self_coeff is None else g.self_coeff[dst_ids],
    )


def neighbor_sample(g: Graph, seeds: Sequence[int], fanouts: Sequence[Optional[int]],
                    rng: np.random.Generator) -> SampledBlock:
    """
    neighbor_sample: build the hop structures for a batch of seed nodes.
    Args:
        g: the graph; GCN coefficients, when present, are carried into the blocks.
        seeds: the output nodes of the batch.
        fanouts: neighbors drawn per destination at each hop, input hop first. None or a negative
            value keeps the whole neighborhood. Sampling is without replacement, capped at the degree.
        rng: the sampler stream.
    Returns:
        the SampledBlock, one Block per hop.
    """
    seeds = np.asarray(seeds, dtype=np.int64)
    if seeds.size == 0:
        raise GraphError("neighbor_sample needs at least one seed node")
    if seeds.min() < 0 or seeds.max() >= g.num_nodes:
        raise GraphError("seed node out of range")
    if np.unique(seeds).shape[0] != seeds.shape[0]:
        raise GraphError("seed nodes must be distinct")

    blocks: List[Block] = []
    dst_ids = seeds
    for fanout in reversed(list(fanouts)):
        block = _sample_hop(g, dst_ids, fanout, rng)
        blocks.append(block)
        dst_ids = block.src_ids
    blocks.reverse()
    return SampledBlock(blocks)


def cluster_partition(g: Graph, num_clusters: int, rng: np.random.Generator) -> List[np.ndarray]:
    """
    cluster_partition: split the nodes into `num_clusters` balanced, connected-where-possible parts by
    growing BFS regions from random start nodes. Part sizes differ by at most one.
    :return: a list of sorted node-id arrays forming a disjoint cover of the nodes.
    """
    n = g.num_nodes
    if num_clusters < 1 or num_clusters > n:
        raise GraphError(f"num_clusters must lie in [1, {n}], got {num_clusters}")

    sizes = [n // num_clusters + (1 if c < n % num_clusters else 0) for c in range(num_clusters)]
    assigned = np.full(n, -1, dtype=np.int64)
    order = rng.permutation(n)
    cursor = 0
    parts: List[np.ndarray] = []

    for c, size in enumerate(sizes):
        members: List[int] = []
        queue: deque = deque()
        while len(members) < size:
            if not queue:
                while assigned[order[cursor]] >= 0:
                    cursor += 1
                start = int(order[cursor])
                assigned[start] = c
                members.append(start)
                queue.append(start)
                continue
            v = queue.popleft()
            for u in g.neighbors(v):
                if len(members) >= size:
                    break
                if assigned[u] < 0:
                    assigned[u] = c
                    members.append(int(u))
                    queue.append(int(u))
        parts.append(np.sort(np.asarray(members, dtype=np.int64)))

    logger.debug("partitioned %d nodes into %d clusters", n, num_clusters)
    return parts


def count_non_edges(g: Graph) -> int:
    n = g.num_nodes
    return n * (n - 1) // 2 - g.num_undirected_edges


def negative_sample_edges(g: Graph, count: int, rng: np.random.Generator) -> np.ndarray:
    """
    negative_sample_edges: draw distinct node pairs that are not edges, uniformly.
    :return: an (count, 2) array of pairs with u < v.
    """
    if count < 0:
        raise GraphError(f"count must be non-negative, got {count}")
    available = count_non_edges(g)
    if count > available:
        raise GraphError(f"requested {count} non-edges but only {available} exist")
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)

    n = g.num_nodes
    if n * (n - 1) // 2 <= _ENUMERATE_LIMIT or count * 4 >= available:
        u, v = np.triu_indices(n, k=1)
        free = ~g.has_edges(u, v)
        candidates = np.stack([u[free], v[free]], axis=1)
        chosen = np.sort(rng.choice(candidates.shape[0], size=count, replace=False))
        return candidates[chosen].astype(np.int64)

    seen = set()
    out: List[tuple] = []
    while len(out) < count:
        batch = max(2 * (count - len(out)), 64)
        u = rng.integers(0, n, size=batch)
        v = rng.integers(0, n, size=batch)
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        keep = (lo != hi) & ~g.has_edges(lo, hi)
        for a, b in zip(lo[keep], hi[keep]):
            key = (int(a), int(b))
            if key not in seen:
                seen.add(key)
                out.append(key)
                if len(out) == count:
                    break
    return np.asarray(out, dtype=np.int64)
