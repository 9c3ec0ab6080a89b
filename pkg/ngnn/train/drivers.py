"""
Training drivers: node classification under full-graph, neighbor-sampling and cluster training, and
full-graph (or neighbor-sampled) link prediction with a dot-product decoder.
"""
import time
import logging
from dataclasses import dataclass, asdict, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import softmax

from ngnn.graph import Graph, LinkDataset, NodeDataset, cluster_partition, gcn_normalize, negative_sample_edges, \
    neighbor_sample
from ngnn.model import Model, ModelConfig, build_model
from ngnn.tensor import Tensor, add, backward, binary_cross_entropy_with_logits, make_optimizer, no_grad, \
    pairs_dot, scale, softmax_cross_entropy, take_rows
from ngnn.train.config import TrainConfig, check_compatible
from ngnn.train.metrics import accuracy, hits_at_k, roc_auc
from ngnn.utils.errors import ConfigError, DatasetError
from ngnn.utils.rng import make_rng
from ngnn.utils.system import config_hash

logger = logging.getLogger(__name__)

HITS_REPORTED = (20, 50, 100)

__all__ = [
    'RunResult',
    'train_node_classifier',
    'train_link_predictor',
    'timed_epoch',
    'epoch_time_summary',
    'run_config_hash',
]


@dataclass
class RunResult:
    """
    The record of one seeded training run. `test_metric` is taken at the evaluation that maximizes
    the validation metric (the earliest one on ties).
    """
    config_hash: str
    seed: int
    epochs: int
    metric: str
    train_loss: List[float]
    valid_curve: List[float]
    best_valid: float
    best_epoch: int
    test_metric: float
    epoch_seconds: List[float]
    param_count: int
    extra: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['curves'] = {'train_loss': data.pop('train_loss'), 'valid': data.pop('valid_curve')}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunResult':
        data = dict(data)
        curves = data.pop('curves', {})
        data.pop('stored_at', None)
        return cls(train_loss=list(curves.get('train_loss', [])), valid_curve=list(curves.get('valid', [])), **data)


def run_config_hash(mcfg: ModelConfig, tcfg: TrainConfig, **extra: Any) -> str:
    """The hash shared by every seed of one configuration."""
    train = tcfg.to_dict()
    train.pop('seed')
    return config_hash({'model': mcfg.to_dict(), 'train': train, **extra})


def epoch_time_summary(seconds: List[float], warmup: int = 1) -> Tuple[float, float]:
    """Mean and standard deviation of epoch times, the warm-up epochs excluded when enough remain."""
    samples = np.asarray(seconds[warmup:] if len(seconds) > warmup else seconds, dtype=np.float64)
    if samples.size == 0:
        return 0.0, 0.0
    return float(samples.mean()), float(samples.std())


def timed_epoch(epoch_fn: Callable[[], float]) -> Tuple[float, float]:
    """
    Run one training epoch and return its loss and wall-clock seconds. Evaluation is not part of the
    epoch; runs report the mean and std of these samples through epoch_time_summary.
    """
    start = time.perf_counter()
    loss = epoch_fn()
    return loss, time.perf_counter() - start


class _Trainer:
    """Shared state of one run: the model, its optimizer and the named random streams."""

    def __init__(self, mcfg: ModelConfig, tcfg: TrainConfig, graph: Graph, features: Tensor):
        self.mcfg = mcfg
        self.tcfg = tcfg
        self.dtype = tcfg.dtype
        self.graph = gcn_normalize(graph) if mcfg.arch == 'gcn' and not graph.is_normalized else graph
        self.x = Tensor(features.data.astype(self.dtype))
        self.model: Model = build_model(mcfg, make_rng(tcfg.seed, 'init'), self.dtype)
        self.optimizer = make_optimizer(tcfg.optimizer, self.model.parameters(), tcfg.lr,
                                        weight_decay=tcfg.weight_decay, momentum=tcfg.momentum)
        self.dropout_rng = make_rng(tcfg.seed, 'dropout')
        self.batch_rng = make_rng(tcfg.seed, 'batches')
        self.sampler_rng = make_rng(tcfg.seed, 'sampler')

    def step(self, loss_fn: Callable[[], Tensor]) -> float:
        self.optimizer.zero_grad()
        loss = loss_fn()
        backward(loss, self.optimizer.params)
        self.optimizer.step()
        return loss.item()

    def inputs(self, ids: np.ndarray) -> Tensor:
        return Tensor(self.x.data[ids])

    def embed(self) -> np.ndarray:
        with no_grad():
            return self.model(self.graph, self.x, train=False).numpy()


def _fit(trainer: _Trainer, epoch_fn: Callable[[], float], evaluate: Callable[[], Tuple[float, float, Dict]],
         metric: str, hash_: str) -> RunResult:
    tcfg = trainer.tcfg
    losses, valid_curve, seconds = [], [], []
    best_valid, best_epoch, test_metric, extra = -np.inf, 0, float('nan'), {}

    if tcfg.epochs == 0:
        best_valid, test_metric, extra = evaluate()
        valid_curve.append(best_valid)

    for epoch in range(1, tcfg.epochs + 1):
        loss, elapsed = timed_epoch(epoch_fn)
        seconds.append(elapsed)
        losses.append(loss)
        logger.debug("epoch %d: loss %.6f (%.3fs)", epoch, loss, seconds[-1])
        if epoch % tcfg.eval_every == 0 or epoch == tcfg.epochs:
            valid, test, more = evaluate()
            valid_curve.append(valid)
            if valid > best_valid:
                best_valid, best_epoch, test_metric, extra = valid, epoch, test, more

    result = RunResult(
        config_hash=hash_,
        seed=tcfg.seed,
        epochs=tcfg.epochs,
        metric=metric,
        train_loss=losses,
        valid_curve=valid_curve,
        best_valid=float(best_valid),
        best_epoch=best_epoch,
        test_metric=float(test_metric),
        epoch_seconds=seconds,
        param_count=trainer.model.num_params(),
        extra=extra,
    )
    logger.info("seed %d: best valid %s %.4f at epoch %d, test %.4f", tcfg.seed, metric, result.best_valid,
                best_epoch, result.test_metric)
    return result


def _node_metric(name: str, logits: np.ndarray, labels: np.ndarray) -> float:
    if name == 'accuracy':
        return accuracy(np.argmax(logits, axis=1), labels)
    return roc_auc(softmax(logits.astype(np.float64), axis=1)[:, 1], labels)


def train_node_classifier(d: NodeDataset, mcfg: ModelConfig, tcfg: TrainConfig,
                          hash_: Optional[str] = None) -> RunResult:
    """
    train_node_classifier: train a node classifier with the configured driver and select the test
    metric at the best validation evaluation. Evaluation always runs full-graph inference.
    Args:
        d: the dataset; needs non-empty train, valid and test splits.
        mcfg: the model; in_dim must equal the feature width.
        tcfg: the training configuration.
        hash_: the configuration hash to record, derived from the configs when omitted.
    """
    check_compatible(mcfg, tcfg, d.num_features)
    for name in ('train', 'valid', 'test'):
        if d.split.get(name) is None or d.split[name].size == 0:
            raise ConfigError(f"dataset has an empty '{name}' split", field='dataset')
    if d.num_classes > mcfg.out_dim:
        raise ConfigError(f"{d.num_classes} classes for an output width of {mcfg.out_dim}", field='model.out_dim')
    if tcfg.metric == 'roc_auc' and mcfg.out_dim != 2:
        raise ConfigError("roc_auc scores binary tasks; set out_dim to 2", field='train.metric')

    trainer = _Trainer(mcfg, tcfg, d.graph, d.features)
    model = trainer.model
    train_ids, labels = d.split['train'], d.labels

    def full_graph_epoch() -> float:
        return trainer.step(lambda: softmax_cross_entropy(
            take_rows(model(trainer.graph, trainer.x, train=True, rng=trainer.dropout_rng), train_ids),
            labels[train_ids]))

    def neighbor_sampling_epoch() -> float:
        order = trainer.batch_rng.permutation(train_ids)
        total = 0.0
        for start in range(0, order.shape[0], tcfg.batch_size):
            seeds = order[start:start + tcfg.batch_size]
            sampled = neighbor_sample(trainer.graph, seeds, tcfg.fanouts, trainer.sampler_rng)
            xb = trainer.inputs(sampled.input_ids)
            loss = trainer.step(lambda: softmax_cross_entropy(
                model(sampled, xb, train=True, rng=trainer.dropout_rng), labels[seeds]))
            total += loss * seeds.shape[0]
        return total / order.shape[0]

    is_train = np.zeros(d.num_nodes, dtype=bool)
    is_train[train_ids] = True
    parts = cluster_partition(d.graph, tcfg.num_clusters, make_rng(tcfg.seed, 'partition')) \
        if tcfg.method == 'cluster' else []

    def cluster_epoch() -> float:
        order = trainer.batch_rng.permutation(len(parts))
        total, count = 0.0, 0
        for start in range(0, len(parts), tcfg.clusters_per_batch):
            nodes = np.sort(np.concatenate([parts[i] for i in order[start:start + tcfg.clusters_per_batch]]))
            local = np.nonzero(is_train[nodes])[0]
            if local.size == 0:
                continue
            sub = d.graph.induced_subgraph(nodes)
            if mcfg.arch == 'gcn':
                sub = gcn_normalize(sub)
            xb = trainer.inputs(nodes)
            loss = trainer.step(lambda: softmax_cross_entropy(
                take_rows(model(sub, xb, train=True, rng=trainer.dropout_rng), local), labels[nodes[local]]))
            total += loss * local.shape[0]
            count += local.shape[0]
        return total / max(count, 1)

    def evaluate() -> Tuple[float, float, Dict[str, float]]:
        logits = trainer.embed()
        valid = _node_metric(tcfg.metric, logits[d.split['valid']], labels[d.split['valid']])
        test = _node_metric(tcfg.metric, logits[d.split['test']], labels[d.split['test']])
        return valid, test, {f'train_{tcfg.metric}': _node_metric(tcfg.metric, logits[train_ids], labels[train_ids])}

    epoch_fn = {
        'full_graph': full_graph_epoch,
        'neighbor_sampling': neighbor_sampling_epoch,
        'cluster': cluster_epoch,
    }[tcfg.method]
    return _fit(trainer, epoch_fn, evaluate, tcfg.metric, hash_ or run_config_hash(mcfg, tcfg))


def _edge_scores(h: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    return np.einsum('ij,ij->i', h[pairs[:, 0]], h[pairs[:, 1]])


def train_link_predictor(d: LinkDataset, mcfg: ModelConfig, tcfg: TrainConfig,
                         hash_: Optional[str] = None) -> RunResult:
    """
    train_link_predictor: train a GNN encoder whose edge score is the dot product of the endpoint
    embeddings. Each step pairs the positive training edges with as many freshly sampled negatives
    under a binary cross-entropy loss; evaluation ranks the fixed split negatives with hits@K.
    """
    check_compatible(mcfg, tcfg, d.num_features)
    if tcfg.method == 'cluster':
        raise ConfigError("link prediction supports full_graph and neighbor_sampling", field='train.method')
    for name in ('valid_neg', 'test_neg'):
        if getattr(d, name).shape[0] < tcfg.hits_k:
            raise ConfigError(f"{name} has fewer than hits_k={tcfg.hits_k} pairs", field='train.hits_k')
    for name in ('valid_pos', 'test_pos'):
        if getattr(d, name).shape[0] == 0:
            raise DatasetError(f"{name} is empty; hits@K needs held-out positive edges")

    trainer = _Trainer(mcfg, tcfg, d.graph, d.features)
    model = trainer.model
    train_pos = d.train_pos
    if train_pos.shape[0] == 0:
        raise ConfigError("the training graph has no edges", field='dataset')
    neg_rng = make_rng(tcfg.seed, 'negatives')
    ones = np.ones(train_pos.shape[0])

    def pair_loss(h: Tensor, pos: np.ndarray, neg: np.ndarray) -> Tensor:
        pos_scores = pairs_dot(take_rows(h, pos[:, 0]), take_rows(h, pos[:, 1]))
        neg_scores = pairs_dot(take_rows(h, neg[:, 0]), take_rows(h, neg[:, 1]))
        return scale(add(binary_cross_entropy_with_logits(pos_scores, ones[:pos.shape[0]]),
                         binary_cross_entropy_with_logits(neg_scores, np.zeros(neg.shape[0]))), 0.5)

    def full_graph_epoch() -> float:
        neg = negative_sample_edges(d.graph, train_pos.shape[0], neg_rng)
        return trainer.step(lambda: pair_loss(
            model(trainer.graph, trainer.x, train=True, rng=trainer.dropout_rng), train_pos, neg))

    def neighbor_sampling_epoch() -> float:
        order = trainer.batch_rng.permutation(train_pos.shape[0])
        total = 0.0
        for start in range(0, order.shape[0], tcfg.batch_size):
            pos = train_pos[order[start:start + tcfg.batch_size]]
            neg = negative_sample_edges(d.graph, pos.shape[0], neg_rng)
            nodes = np.unique(np.concatenate([pos.reshape(-1), neg.reshape(-1)]))
            sampled = neighbor_sample(trainer.graph, nodes, tcfg.fanouts, trainer.sampler_rng)
            xb = trainer.inputs(sampled.input_ids)
            loss = trainer.step(lambda: pair_loss(
                model(sampled, xb, train=True, rng=trainer.dropout_rng),
                np.searchsorted(nodes, pos), np.searchsorted(nodes, neg)))
            total += loss * pos.shape[0]
        return total / order.shape[0]

    warned = set()

    def evaluate() -> Tuple[float, float, Dict[str, float]]:
        h = trainer.embed()
        valid_pos, valid_neg = _edge_scores(h, d.valid_pos), _edge_scores(h, d.valid_neg)
        test_pos, test_neg = _edge_scores(h, d.test_pos), _edge_scores(h, d.test_neg)
        extra = {}
        for k in HITS_REPORTED:
            if k > test_neg.shape[0] or k > valid_neg.shape[0]:
                if k not in warned:
                    logger.warning("skipping hits@%d: only %d test negatives", k, test_neg.shape[0])
                    warned.add(k)
                continue
            extra[f'valid_hits@{k}'] = hits_at_k(valid_pos, valid_neg, k)
            extra[f'test_hits@{k}'] = hits_at_k(test_pos, test_neg, k)
        return hits_at_k(valid_pos, valid_neg, tcfg.hits_k), hits_at_k(test_pos, test_neg, tcfg.hits_k), extra

    epoch_fn = full_graph_epoch if tcfg.method == 'full_graph' else neighbor_sampling_epoch
    return _fit(trainer, epoch_fn, evaluate, f'hits@{tcfg.hits_k}', hash_ or run_config_hash(mcfg, tcfg))
