"""
Synthetic datasets: a C-block stochastic block model with Gaussian class features, and a
link-prediction split carved out of any graph.
"""
import logging
from dataclasses import dataclass, asdict
from typing import Any, Dict

import numpy as np

from ngnn.graph.dataset import LinkDataset, NodeDataset
from ngnn.graph.graph import Graph, build_graph
from ngnn.graph.sampling import negative_sample_edges
from ngnn.tensor import Tensor
from ngnn.utils.errors import ConfigError, GraphError
from ngnn.utils.rng import make_rng

logger = logging.getLogger(__name__)

__all__ = ['SbmSpec', 'generate_sbm', 'make_link_split']


@dataclass
class SbmSpec:
    """
    Attributes:
        num_nodes: N.
        num_classes: C blocks, one class per block.
        dim: feature width D.
        p: intra-block edge probability.
        q: inter-block edge probability.
        separation: norm of each class-mean vector (0 makes the classes indistinguishable by features).
        train_frac, valid_frac: split fractions; the remainder is the test split.
        seed: generator seed.
    """
    num_nodes: int = 2000
    num_classes: int = 2
    dim: int = 16
    p: float = 0.02
    q: float = 0.002
    separation: float = 1.0
    train_frac: float = 0.6
    valid_frac: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.num_nodes < self.num_classes or self.num_classes < 1:
            raise ConfigError("need 1 <= num_classes <= num_nodes", field='num_classes')
        if self.dim < 1:
            raise ConfigError("feature dimension must be positive", field='dim')
        for name in ('p', 'q'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError("edge probability must lie in [0, 1]", field=name)
        if self.train_frac <= 0 or self.valid_frac < 0 or self.train_frac + self.valid_frac >= 1:
            raise ConfigError("split fractions must leave a non-empty test split", field='train_frac')

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _class_means(spec: SbmSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.num_classes <= spec.dim:
        means = np.eye(spec.num_classes, spec.dim)
    else:
        means = rng.standard_normal((spec.num_classes, spec.dim))
        means /= np.linalg.norm(means, axis=1, keepdims=True)
    return spec.separation * means


def generate_sbm(spec: SbmSpec) -> NodeDataset:
    """
    generate_sbm: sample a stochastic block model node-classification dataset.
    Nodes are assigned to blocks in equal shares; each pair inside a block is an edge with
    probability p, each pair across blocks with probability q. Features are the class mean plus
    unit Gaussian noise. The split is a random train/valid/test partition.
    """
    if spec.q >= spec.p:
        logger.warning("q >= p: classes are not recoverable from the graph structure")

    rng = make_rng(spec.seed, 'synth')
    n = spec.num_nodes
    labels = rng.permutation(np.arange(n) % spec.num_classes)

    src, dst = [], []
    for u in range(n - 1):
        others = np.arange(u + 1, n)
        probs = np.where(labels[others] == labels[u], spec.p, spec.q)
        hit = others[rng.random(others.shape[0]) < probs]
        src.append(np.full(hit.shape[0], u))
        dst.append(hit)
    edges = np.stack([np.concatenate(src), np.concatenate(dst)], axis=1) if src else np.zeros((0, 2))
    graph = build_graph(edges, n)

    features = _class_means(spec, rng)[labels] + rng.standard_normal((n, spec.dim))

    order = rng.permutation(n)
    n_train = int(round(spec.train_frac * n))
    n_valid = int(round(spec.valid_frac * n))
    split = {
        'train': order[:n_train],
        'valid': order[n_train:n_train + n_valid],
        'test': order[n_train + n_valid:],
    }
    logger.info("generated SBM: %d nodes, %d edges, %d classes", n, graph.num_undirected_edges, spec.num_classes)
    return NodeDataset(graph=graph, features=Tensor(features.astype(np.float32)), labels=labels, split=split)


def make_link_split(graph: Graph, features: Tensor, valid_frac: float = 0.1, test_frac: float = 0.1,
                    num_negatives: int = 1000, seed: int = 0) -> LinkDataset:
    """
    make_link_split: hold out a fraction of the edges as valid/test positives and draw fixed negative
    sets from the pairs that are not edges of the full graph.
    """
    rng = make_rng(seed, 'link-split')
    edges = graph.undirected_edges()
    order = rng.permutation(edges.shape[0])
    n_valid = int(round(valid_frac * edges.shape[0]))
    n_test = int(round(test_frac * edges.shape[0]))
    if n_valid == 0 or n_test == 0:
        raise GraphError(f"{edges.shape[0]} edges are too few to hold out valid and test positives")
    if n_valid + n_test >= edges.shape[0]:
        raise GraphError("not enough edges left for training after the held-out split")

    valid_pos = edges[order[:n_valid]]
    test_pos = edges[order[n_valid:n_valid + n_test]]
    train_edges = edges[order[n_valid + n_test:]]

    negatives = negative_sample_edges(graph, 2 * num_negatives, rng)
    negatives = negatives[rng.permutation(negatives.shape[0])]
    return LinkDataset(
        graph=build_graph(train_edges, graph.num_nodes),
        features=features,
        valid_pos=valid_pos,
        valid_neg=negatives[:num_negatives],
        test_pos=test_pos,
        test_neg=negatives[num_negatives:],
    )
