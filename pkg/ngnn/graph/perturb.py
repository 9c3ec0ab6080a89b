"""
Feature and structure perturbations used by the robustness sweeps.
"""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from ngnn.graph.dataset import LinkDataset, NodeDataset, with_features, with_graph
from ngnn.graph.graph import Graph, build_graph, gcn_normalize
from ngnn.graph.sampling import negative_sample_edges
from ngnn.tensor import Tensor
from ngnn.utils.errors import ConfigError, GraphError
from ngnn.utils.rng import make_rng

logger = logging.getLogger(__name__)

PERTURB_MODES = ('feature_concat', 'feature_add', 'edge_add')

__all__ = [
    'PERTURB_MODES',
    'PerturbSpec',
    'perturb_features_concat',
    'perturb_features_add',
    'perturb_edges',
    'added_edge_count',
    'apply_perturbation',
]


@dataclass(frozen=True)
class PerturbSpec:
    """
    One perturbation: Gaussian feature noise N(0, sigma) appended or added, or random edges
    amounting to `ratio` times the existing edges.
    """
    mode: str
    sigma: float = 0.0
    ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in PERTURB_MODES:
            raise ConfigError(f"unknown perturbation mode '{self.mode}', expected one of {PERTURB_MODES}", field='mode')
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative", field='sigma')
        if self.ratio < 0:
            raise ConfigError("ratio must be non-negative", field='ratio')
        if self.mode == 'edge_add' and self.sigma:
            raise ConfigError("edge noise takes a ratio, not a sigma", field='sigma')
        if self.mode != 'edge_add' and self.ratio:
            raise ConfigError("feature noise takes a sigma, not a ratio", field='ratio')


def perturb_features_concat(x: Tensor, sigma: float, rng: np.random.Generator) -> Tensor:
    """
    Append an N x D block of N(0, sigma) noise: the output has 2D columns, the first D unchanged.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    noise = rng.normal(0.0, sigma, size=x.shape).astype(x.dtype) if sigma > 0 else np.zeros_like(x.data)
    return Tensor(np.concatenate([x.data, noise], axis=1))


def perturb_features_add(x: Tensor, sigma: float, rng: np.random.Generator) -> Tensor:
    """
    Add N(0, sigma) noise to every feature.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return Tensor(x.data.copy())
    return Tensor((x.data + rng.normal(0.0, sigma, size=x.shape)).astype(x.dtype))


def added_edge_count(g: Graph, ratio: float) -> int:
    """round(ratio * undirected edge count), halves rounded up."""
    return int(np.floor(ratio * g.num_undirected_edges + 0.5))


def perturb_edges(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """
    Add round(ratio * |E|) new undirected edges drawn uniformly from the non-edges. The original
    edges are kept; a normalized input graph yields a re-normalized output.
    """
    if ratio < 0:
        raise ValueError(f"ratio must be non-negative, got {ratio}")
    count = added_edge_count(g, ratio)
    if count == 0:
        return g
    try:
        new_edges = negative_sample_edges(g, count, rng)
    except GraphError as e:
        raise GraphError(f"cannot add {count} noise edges: {e}") from e

    out = build_graph(np.concatenate([g.undirected_edges(), new_edges]), g.num_nodes)
    logger.debug("added %d noise edges (%d directed)", count, 2 * count)
    return gcn_normalize(out) if g.is_normalized else out


def apply_perturbation(d: Union[NodeDataset, LinkDataset], spec: PerturbSpec) -> Union[NodeDataset, LinkDataset]:
    """
    Apply a perturbation to a dataset copy. Feature noise never touches the graph and edge noise
    never touches the features.
    """
    rng = make_rng(spec.seed, 'noise', spec.mode)
    if spec.mode == 'feature_concat':
        return with_features(d, perturb_features_concat(d.features, spec.sigma, rng))
    if spec.mode == 'feature_add':
        return with_features(d, perturb_features_add(d.features, spec.sigma, rng))
    return with_graph(d, perturb_edges(d.graph, spec.ratio, rng))
