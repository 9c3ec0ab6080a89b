"""
Experiment configuration: the dataset, the task, the model and training configurations, the seeds
and an optional sweep.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

from ngnn.model import ModelConfig
from ngnn.train import TrainConfig
from ngnn.utils.errors import ConfigError
from ngnn.utils.system import load_config

TASKS = ('node_class', 'link_pred')
SWEEP_AXES = ('feature_add', 'feature_concat', 'edge_noise', 'ngnn_depth', 'hidden', 'position')
EXPERIMENT_KEYS = ('dataset', 'task', 'model', 'train', 'runs', 'seed', 'threads', 'sweep')

__all__ = [
    'TASKS',
    'SWEEP_AXES',
    'DatasetConfig',
    'SweepConfig',
    'ExperimentConfig',
    'load_experiment',
    'scaffold_experiment',
]


@dataclass
class DatasetConfig:
    """
    Attributes:
        root: the dataset directory.
        files: per-file path overrides, keyed like the dataset file table (edges, features, ...).
    """
    root: Optional[str] = None
    files: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Any) -> 'DatasetConfig':
        if isinstance(data, str):
            return cls(root=data)
        if not isinstance(data, dict):
            raise ConfigError("must be a directory path or a mapping", field='dataset')
        unknown = sorted(set(data) - {'root', 'files'})
        if unknown:
            raise ConfigError(f"unknown keys {unknown}", field='dataset')
        files = data.get('files') or {}
        if not isinstance(files, dict):
            raise ConfigError("must map file names to paths", field='dataset.files')
        if not data.get('root') and not files:
            raise ConfigError("needs a root directory or file paths", field='dataset')
        return cls(root=data.get('root'), files=dict(files))

    def to_dict(self) -> Dict[str, Any]:
        return {'root': self.root, 'files': dict(self.files)}


@dataclass
class SweepConfig:
    """
    One sweep axis and its values. `hidden` may accompany `ngnn_depth` to form the depth-by-width grid;
    `variants` names the compared model variants of the noise sweeps.
    """
    axis: str
    values: List[Any]
    hidden: Optional[List[int]] = None
    variants: Optional[List[str]] = None

    @classmethod
    def from_dict(cls, data: Any) -> 'SweepConfig':
        if not isinstance(data, dict):
            raise ConfigError("must be a mapping", field='sweep')
        unknown = sorted(set(data) - set(SWEEP_AXES) - {'variants'})
        if unknown:
            raise ConfigError(f"unknown keys {unknown}", field='sweep')
        axes = [a for a in SWEEP_AXES if a in data]
        if axes == ['ngnn_depth', 'hidden']:
            axes = ['ngnn_depth']
        if len(axes) != 1:
            raise ConfigError(f"exactly one sweep axis is allowed per run, got {axes or 'none'}", field='sweep')
        axis = axes[0]
        values = data[axis]
        if not isinstance(values, list) or not values:
            raise ConfigError("must be a non-empty list", field=f'sweep.{axis}')
        hidden = data.get('hidden') if axis == 'ngnn_depth' else None
        if hidden is not None and (not isinstance(hidden, list) or not hidden):
            raise ConfigError("must be a non-empty list", field='sweep.hidden')
        variants = data.get('variants')
        if variants is not None and (not isinstance(variants, list) or not variants):
            raise ConfigError("must be a non-empty list", field='sweep.variants')
        return cls(axis=axis, values=list(values), hidden=hidden, variants=variants)

    def to_dict(self) -> Dict[str, Any]:
        data = {self.axis: list(self.values)}
        if self.hidden:
            data['hidden'] = list(self.hidden)
        if self.variants:
            data['variants'] = list(self.variants)
        return data


@dataclass
class ExperimentConfig:
    """
    Attributes:
        dataset: where the dataset files live.
        task: node_class or link_pred.
        model: the model configuration.
        train: the training configuration; its seed is replaced per run.
        runs: seeded runs per configuration, seeds seed .. seed + runs - 1.
        seed: the first run seed.
        threads: worker threads for the runs.
        sweep: the sweep axis of sweep commands.
    """
    dataset: DatasetConfig
    task: str = 'node_class'
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    runs: int = 10
    seed: int = 0
    threads: int = 1
    sweep: Optional[SweepConfig] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task '{self.task}', expected one of {TASKS}", field='task')
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError("at least one run is required", field='runs')
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("must be a non-negative integer", field='seed')
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("must be a positive integer", field='threads')

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        unknown = sorted(set(data) - set(EXPERIMENT_KEYS))
        if unknown:
            raise ConfigError(f"unknown keys {unknown}", field='config')
        if 'dataset' not in data:
            raise ConfigError("is required", field='dataset')
        for key in ('model', 'train'):
            if not isinstance(data.get(key, {}), dict):
                raise ConfigError("must be a mapping", field=key)
        return cls(
            dataset=DatasetConfig.from_dict(data['dataset']),
            task=data.get('task', 'node_class'),
            model=ModelConfig.from_dict(data.get('model', {})),
            train=TrainConfig.from_dict(data.get('train', {})),
            runs=data.get('runs', 10),
            seed=data.get('seed', 0),
            threads=data.get('threads', 1),
            sweep=SweepConfig.from_dict(data['sweep']) if data.get('sweep') is not None else None,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dataset': self.dataset.to_dict(),
            'task': self.task,
            'model': self.model.to_dict(),
            'train': self.train.to_dict(),
            'runs': self.runs,
            'seed': self.seed,
            'threads': self.threads,
            'sweep': self.sweep.to_dict() if self.sweep else None,
        }

    @property
    def seeds(self) -> List[int]:
        return list(range(self.seed, self.seed + self.runs))

    def with_overrides(self, seed: Optional[int] = None, runs: Optional[int] = None,
                       threads: Optional[int] = None) -> 'ExperimentConfig':
        """Apply command-line overrides; None leaves a value unchanged."""
        changes = {k: v for k, v in (('seed', seed), ('runs', runs), ('threads', threads)) if v is not None}
        return replace(self, **changes)


def load_experiment(path: str) -> ExperimentConfig:
    """
    Load an experiment configuration file (YAML or JSON).
    :param path: the configuration file path.
    """
    return ExperimentConfig.from_dict(load_config(path))


def scaffold_experiment(arch: str = 'sage', task: str = 'node_class', position: str = 'hidden',
                        spec: str = '1-relu', dataset: str = 'data', in_dim: int = 16, out_dim: int = 2) -> Dict[str, Any]:
    """
    scaffold_experiment: the configuration written by `ngnn new`. The defaults match the shape of the
    `gen-synth` dataset; the result is validated before it is returned.
    :return: the configuration dictionary.
    """
    data = {
        'dataset': {'root': dataset},
        'task': task,
        'model': {
            'arch': arch,
            'in_dim': in_dim,
            'hidden_dim': 64,
            'out_dim': out_dim,
            'num_layers': 3,
            'heads': 4,
            'ngnn_position': position,
            'ngnn_spec': spec,
            'dropout': 0.0,
        },
        'train': {'method': 'full_graph', 'epochs': 200, 'lr': 0.003},
        'runs': 10,
        'seed': 0,
        'sweep': {'feature_add': [0.0, 1.0, 2.0, 4.0]},
    }
    ExperimentConfig.from_dict(data)
    return data
