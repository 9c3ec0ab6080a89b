from dataclasses import dataclass, asdict, fields, replace
from typing import Any, Dict, List, Optional

import numpy as np

from ngnn.model import ModelConfig
from ngnn.utils.errors import ConfigError

METHODS = ('full_graph', 'neighbor_sampling', 'cluster')
OPTIMIZERS = ('adam', 'sgd')
NODE_METRICS = ('accuracy', 'roc_auc')
PRECISIONS = {'float32': np.float32, 'float64': np.float64}

__all__ = ['METHODS', 'OPTIMIZERS', 'NODE_METRICS', 'TrainConfig', 'check_compatible']


@dataclass
class TrainConfig:
    """
    Attributes:
        method: full_graph, neighbor_sampling or cluster.
        epochs: training epochs; 0 evaluates the untrained model.
        batch_size: seed nodes (or positive edges) per neighbor-sampling step.
        fanouts: neighbors drawn per hop, input hop first; None or -1 keeps the whole neighborhood.
        num_clusters: partition count of cluster training.
        clusters_per_batch: partitions merged into one cluster-training step.
        optimizer: adam or sgd; lr, weight_decay and momentum are its hyperparameters.
        seed: the run seed; every random stream of a run derives from it.
        eval_every: evaluate every n epochs (and after the last one).
        metric: node-classification metric, accuracy or roc_auc.
        hits_k: K of the link-prediction selection metric.
        precision: float32, or float64 for exact comparisons.
    """
    method: str = 'full_graph'
    epochs: int = 100
    batch_size: int = 1024
    fanouts: Optional[List[Optional[int]]] = None
    num_clusters: Optional[int] = None
    clusters_per_batch: int = 1
    optimizer: str = 'adam'
    lr: float = 0.003
    weight_decay: float = 0.0
    momentum: float = 0.0
    seed: int = 0
    eval_every: int = 1
    metric: str = 'accuracy'
    hits_k: int = 50
    precision: str = 'float32'

    def __post_init__(self):
        self.validate()

    def validate(self, prefix: str = 'train') -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method '{self.method}', expected one of {METHODS}", field=f'{prefix}.method')
        if not isinstance(self.epochs, int) or self.epochs < 0:
            raise ConfigError("must be a non-negative integer", field=f'{prefix}.epochs')
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ConfigError("must be a positive integer", field=f'{prefix}.batch_size')
        if self.method == 'neighbor_sampling':
            if not self.fanouts:
                raise ConfigError("required by neighbor_sampling", field=f'{prefix}.fanouts')
            if any(f is not None and not isinstance(f, int) for f in self.fanouts):
                raise ConfigError("fanouts must be integers or null", field=f'{prefix}.fanouts')
        elif self.fanouts is not None:
            raise ConfigError("only used by neighbor_sampling", field=f'{prefix}.fanouts')
        if self.method == 'cluster':
            if not isinstance(self.num_clusters, int) or self.num_clusters < 1:
                raise ConfigError("cluster training needs a positive cluster count", field=f'{prefix}.num_clusters')
            if self.clusters_per_batch < 1:
                raise ConfigError("must be a positive integer", field=f'{prefix}.clusters_per_batch')
        elif self.num_clusters is not None:
            raise ConfigError("only used by cluster training", field=f'{prefix}.num_clusters')
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer '{self.optimizer}'", field=f'{prefix}.optimizer')
        if self.lr <= 0:
            raise ConfigError("must be positive", field=f'{prefix}.lr')
        if self.weight_decay < 0 or self.momentum < 0:
            raise ConfigError("must be non-negative", field=f'{prefix}.weight_decay')
        if self.eval_every < 1:
            raise ConfigError("must be a positive integer", field=f'{prefix}.eval_every')
        if self.metric not in NODE_METRICS:
            raise ConfigError(f"unknown metric '{self.metric}'", field=f'{prefix}.metric')
        if self.hits_k < 1:
            raise ConfigError("must be a positive integer", field=f'{prefix}.hits_k')
        if self.precision not in PRECISIONS:
            raise ConfigError(f"unknown precision '{self.precision}'", field=f'{prefix}.precision')

    @classmethod
    def from_dict(cls, data: Dict[str, Any], prefix: str = 'train') -> 'TrainConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown keys {unknown}", field=prefix)
        cfg = cls.__new__(cls)
        for f in fields(cls):
            setattr(cfg, f.name, data.get(f.name, f.default))
        cfg.validate(prefix)
        return cfg

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_changes(self, **changes: Any) -> 'TrainConfig':
        return replace(self, **changes)

    @property
    def dtype(self):
        return PRECISIONS[self.precision]


def check_compatible(mcfg: ModelConfig, tcfg: TrainConfig, num_features: Optional[int] = None) -> None:
    """
    Cross-check a model and a training configuration (and the dataset feature width when given).
    """
    if tcfg.method == 'neighbor_sampling' and len(tcfg.fanouts) != mcfg.num_layers:
        raise ConfigError(f"{len(tcfg.fanouts)} fanouts for {mcfg.num_layers} layers", field='train.fanouts')
    if num_features is not None and num_features != mcfg.in_dim:
        raise ConfigError(f"dataset has {num_features} features, model expects {mcfg.in_dim}", field='model.in_dim')
