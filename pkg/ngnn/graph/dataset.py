"""
Node-classification and link-prediction datasets, their on-disk format and node relabelling.

Files in a dataset directory:
    edges.txt       one "u v" pair per line, 0-based (training edges for link datasets)
    features.bin    b"NGNNF1", u64 N, u64 D, N*D little-endian float32, row-major
    labels.txt      one integer per line (node datasets)
    train.txt, valid.txt, test.txt      node ids (node datasets)
    valid_pos.txt, valid_neg.txt, test_pos.txt, test_neg.txt    edge lists (link datasets)
"""
import os
import logging
import struct
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np

from ngnn.graph.graph import Graph, build_graph, gcn_normalize
from ngnn.tensor import Tensor
from ngnn.utils.errors import DatasetError, GraphError
from ngnn.utils.system import file_digest

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"NGNNF1"

NODE_FILES = {
    'edges': 'edges.txt',
    'features': 'features.bin',
    'labels': 'labels.txt',
    'train': 'train.txt',
    'valid': 'valid.txt',
    'test': 'test.txt',
}

LINK_FILES = {
    'edges': 'edges.txt',
    'features': 'features.bin',
    'valid_pos': 'valid_pos.txt',
    'valid_neg': 'valid_neg.txt',
    'test_pos': 'test_pos.txt',
    'test_neg': 'test_neg.txt',
}

__all__ = [
    'NodeDataset',
    'LinkDataset',
    'permute_nodes',
    'read_features',
    'write_features',
    'read_edge_list',
    'write_edge_list',
    'load_node_dataset',
    'save_node_dataset',
    'load_link_dataset',
    'save_link_dataset',
    'resolve_paths',
    'dataset_fingerprint',
    'with_graph',
    'with_features',
    'NODE_FILES',
    'LINK_FILES',
]


def _id_array(values) -> np.ndarray:
    return np.unique(np.asarray(values, dtype=np.int64).reshape(-1))


@dataclass(eq=False)
class NodeDataset:
    graph: Graph
    features: Tensor
    labels: np.ndarray
    split: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = self.graph.num_nodes
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.split = {name: _id_array(ids) for name, ids in self.split.items()}
        if self.features.rows != n:
            raise DatasetError(f"features have {self.features.rows} rows for {n} nodes")
        if self.labels.shape[0] != n:
            raise DatasetError(f"{self.labels.shape[0]} labels for {n} nodes")
        names = list(self.split)
        for i, a in enumerate(names):
            ids = self.split[a]
            if ids.size and (ids.min() < 0 or ids.max() >= n):
                raise DatasetError(f"split '{a}' has node ids outside [0, {n})")
            if ids.size and self.labels[ids].min() < 0:
                raise DatasetError(f"split '{a}' contains unlabeled nodes")
            for b in names[i + 1:]:
                if np.intersect1d(ids, self.split[b]).size:
                    raise DatasetError(f"splits '{a}' and '{b}' overlap")

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def num_features(self) -> int:
        return self.features.cols

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass(eq=False)
class LinkDataset:
    graph: Graph
    features: Tensor
    valid_pos: np.ndarray
    valid_neg: np.ndarray
    test_pos: np.ndarray
    test_neg: np.ndarray

    def __post_init__(self):
        for name in ('valid_pos', 'valid_neg', 'test_pos', 'test_neg'):
            pairs = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 2)
            if pairs.size and (pairs.min() < 0 or pairs.max() >= self.graph.num_nodes):
                raise DatasetError(f"{name} has endpoints outside [0, {self.graph.num_nodes})")
            setattr(self, name, pairs)
        if self.features.rows != self.graph.num_nodes:
            raise DatasetError(f"features have {self.features.rows} rows for {self.graph.num_nodes} nodes")
        for split in ('valid', 'test'):
            pos = getattr(self, f"{split}_pos")
            if pos.size and np.any(self.graph.has_edges(pos[:, 0], pos[:, 1])):
                raise DatasetError(f"{split} positives must not appear in the training graph")
            neg = getattr(self, f"{split}_neg")
            pos_keys = set(map(tuple, np.sort(pos, axis=1).tolist()))
            if any(tuple(p) in pos_keys for p in np.sort(neg, axis=1).tolist()):
                raise DatasetError(f"{split} negatives contain {split} positives")

    @property
    def train_pos(self) -> np.ndarray:
        return self.graph.undirected_edges()

    @property
    def num_features(self) -> int:
        return self.features.cols


def permute_nodes(d: NodeDataset, perm: np.ndarray) -> NodeDataset:
    """
    permute_nodes: relabel old node i as perm[i] in the graph, features, labels and splits.
    """
    perm = np.asarray(perm, dtype=np.int64).reshape(-1)
    n = d.num_nodes
    if perm.shape[0] != n or not np.array_equal(np.sort(perm), np.arange(n)):
        raise GraphError("perm must be a bijection on [0, N)")

    src, dst = d.graph.edge_arrays()
    graph = build_graph(np.stack([perm[src], perm[dst]], axis=1), n, symmetrize=False)
    if d.graph.is_normalized:
        graph = gcn_normalize(graph)
    features = np.empty_like(d.features.data)
    features[perm] = d.features.data
    labels = np.empty_like(d.labels)
    labels[perm] = d.labels
    split = {name: perm[ids] for name, ids in d.split.items()}
    return NodeDataset(graph=graph, features=Tensor(features), labels=labels, split=split)


def read_features(path: str) -> np.ndarray:
    with open(path, 'rb') as f:
        header = f.read(len(FEATURE_MAGIC) + 16)
        if len(header) < len(FEATURE_MAGIC) + 16 or header[:len(FEATURE_MAGIC)] != FEATURE_MAGIC:
            raise DatasetError(f"{path}: not a NGNNF1 feature file")
        n, d = struct.unpack('<QQ', header[len(FEATURE_MAGIC):])
        body = f.read()
    if len(body) != n * d * 4:
        raise DatasetError(f"{path}: expected {n * d * 4} bytes of features, found {len(body)}")
    return np.frombuffer(body, dtype='<f4').reshape(n, d).astype(np.float32)


def write_features(path: str, features: np.ndarray) -> None:
    features = np.asarray(features)
    n, d = features.shape
    with open(path, 'wb') as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack('<QQ', n, d))
        f.write(np.ascontiguousarray(features, dtype='<f4').tobytes())


def read_edge_list(path: str) -> np.ndarray:
    if os.path.getsize(path) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    try:
        arr = np.loadtxt(path, dtype=np.int64, ndmin=2)
    except ValueError as e:
        raise DatasetError(f"{path}: malformed edge list ({e})") from e
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.shape[1] != 2:
        raise DatasetError(f"{path}: edge list needs two columns per line, found {arr.shape[1]}")
    return arr


def write_edge_list(path: str, pairs: np.ndarray) -> None:
    np.savetxt(path, np.asarray(pairs, dtype=np.int64).reshape(-1, 2), fmt='%d')


def _read_ids(path: str) -> np.ndarray:
    if os.path.getsize(path) == 0:
        return np.zeros(0, dtype=np.int64)
    try:
        arr = np.loadtxt(path, dtype=np.int64, ndmin=1)
    except ValueError as e:
        raise DatasetError(f"{path}: malformed id list ({e})") from e
    if arr.ndim != 1:
        raise DatasetError(f"{path}: id list needs one value per line")
    return arr


def resolve_paths(root: Optional[str], defaults: Dict[str, str], overrides: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    """
    Combine a dataset directory with per-file overrides; every resulting path must exist.
    """
    overrides = overrides or {}
    paths = {}
    for key, name in defaults.items():
        path = overrides.get(key) or (os.path.join(root, name) if root else None)
        if path is None:
            raise DatasetError(f"no path for dataset file '{key}'")
        if not os.path.exists(path):
            raise DatasetError(f"dataset file not found: {path}")
        paths[key] = path
    return paths


def dataset_fingerprint(root: Optional[str], defaults: Dict[str, str], overrides: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    """Content digests of the files a dataset is loaded from, keyed like `defaults`."""
    return {key: file_digest(path) for key, path in resolve_paths(root, defaults, overrides).items()}


def load_node_dataset(root: Optional[str] = None, **overrides: str) -> NodeDataset:
    paths = resolve_paths(root, NODE_FILES, overrides)
    features = read_features(paths['features'])
    n = features.shape[0]
    graph = build_graph(read_edge_list(paths['edges']), n)
    labels = _read_ids(paths['labels'])
    split = {name: _read_ids(paths[name]) for name in ('train', 'valid', 'test')}
    logger.info("loaded node dataset: %d nodes, %d edges, %d features", n, graph.num_undirected_edges, features.shape[1])
    return NodeDataset(graph=graph, features=Tensor(features), labels=labels, split=split)


def save_node_dataset(d: NodeDataset, root: str) -> None:
    os.makedirs(root, exist_ok=True)
    write_edge_list(os.path.join(root, NODE_FILES['edges']), d.graph.undirected_edges())
    write_features(os.path.join(root, NODE_FILES['features']), d.features.data)
    np.savetxt(os.path.join(root, NODE_FILES['labels']), d.labels, fmt='%d')
    for name in ('train', 'valid', 'test'):
        np.savetxt(os.path.join(root, NODE_FILES[name]), d.split.get(name, np.zeros(0)), fmt='%d')


def load_link_dataset(root: Optional[str] = None, **overrides: str) -> LinkDataset:
    paths = resolve_paths(root, LINK_FILES, overrides)
    features = read_features(paths['features'])
    graph = build_graph(read_edge_list(paths['edges']), features.shape[0])
    pairs = {name: read_edge_list(paths[name]) for name in ('valid_pos', 'valid_neg', 'test_pos', 'test_neg')}
    logger.info("loaded link dataset: %d nodes, %d training edges", graph.num_nodes, graph.num_undirected_edges)
    return LinkDataset(graph=graph, features=Tensor(features), **pairs)


def save_link_dataset(d: LinkDataset, root: str) -> None:
    os.makedirs(root, exist_ok=True)
    write_edge_list(os.path.join(root, LINK_FILES['edges']), d.graph.undirected_edges())
    write_features(os.path.join(root, LINK_FILES['features']), d.features.data)
    for name in ('valid_pos', 'valid_neg', 'test_pos', 'test_neg'):
        write_edge_list(os.path.join(root, LINK_FILES[name]), getattr(d, name))


def with_graph(d, graph: Graph):
    """A copy of a node or link dataset with another graph."""
    return replace(d, graph=graph)


def with_features(d, features: Tensor):
    """A copy of a node or link dataset with other features."""
    return replace(d, features=features)

