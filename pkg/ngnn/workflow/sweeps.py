"""
Sweep procedures: feature noise, edge noise, NGNN depth by hidden width, and NGNN position. Each
sweep point trains `runs` seeds and becomes one row of a ResultTable.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from ngnn.graph import PerturbSpec, added_edge_count, apply_perturbation
from ngnn.model import POSITIONS, ModelConfig
from ngnn.utils.cache import RunCache
from ngnn.utils.errors import ConfigError
from ngnn.workflow.config import ExperimentConfig, SweepConfig
from ngnn.workflow.report import ResultTable
from ngnn.workflow.runs import Dataset, experiment_hash, load_dataset, run_seeds

logger = logging.getLogger(__name__)

VARIANTS = ('baseline', 'wide', 'deep', 'ngnn-1', 'ngnn-2')
EDGE_NOISE_VARIANTS = ('baseline', 'ngnn-1', 'ngnn-2')
TIMING_EPOCHS = 6
DEFAULT_SWEEPS = {
    'feature_add': [0.0, 1.0, 2.0, 4.0],
    'edge_noise': [0.0, 0.05, 0.1, 0.2],
    'ngnn_depth': [0, 1, 2, 4],
    'position': list(POSITIONS),
}

__all__ = [
    'VARIANTS',
    'variant_config',
    'depth_config',
    'noise_sweep',
    'edge_noise_sweep',
    'depth_sweep',
    'position_sweep',
]


def variant_config(base: ModelConfig, name: str) -> ModelConfig:
    """
    The compared model variants: the vanilla stack, twice the hidden width, one more GNN layer, and
    the vanilla stack with a one- or two-layer ReLU NGNN block on the hidden layers.
    """
    if name == 'baseline':
        return base.with_changes(ngnn_position='none')
    if name == 'wide':
        return base.with_changes(ngnn_position='none', hidden_dim=2 * base.hidden_dim)
    if name == 'deep':
        return base.with_changes(ngnn_position='none', num_layers=base.num_layers + 1)
    if name in ('ngnn-1', 'ngnn-2'):
        return base.with_changes(ngnn_position='hidden', ngnn_spec=f"{name[-1]}-relu")
    raise ConfigError(f"unknown variant '{name}', expected one of {VARIANTS}", field='sweep.variants')


def depth_config(base: ModelConfig, k: int, hidden: int) -> ModelConfig:
    """k NGNN layers (k = 0 is the vanilla stack) at the configured position, hidden layers by default."""
    if k < 0:
        raise ConfigError("NGNN depth must be non-negative", field='sweep.ngnn_depth')
    if k == 0:
        return base.with_changes(hidden_dim=hidden, ngnn_position='none')
    position = base.ngnn_position if base.ngnn_position != 'none' else 'hidden'
    return base.with_changes(hidden_dim=hidden, ngnn_position=position, ngnn_spec=f"{k}-relu")


@dataclass
class SweepPoint:
    variant: str
    value: Any
    model: ModelConfig
    prepare: Callable[[int], Dataset]
    hash_extra: Dict[str, Any] = field(default_factory=dict)
    columns: Dict[str, Any] = field(default_factory=dict)


def _sweep(cfg: ExperimentConfig, axis: str, points: List[SweepPoint], out_dir: str, use_cache: bool) -> ResultTable:
    cache = RunCache(out_dir, enabled=use_cache)
    table: Optional[ResultTable] = None
    for point in points:
        # training seeds double as noise seeds, so noise differs per run but rows stay paired
        hash_ = experiment_hash(cfg, point.model, sweep={'axis': axis, 'value': point.value}, **point.hash_extra)
        results = run_seeds(point.prepare, point.model, cfg.train, cfg.task, cfg.seeds, cache, hash_, cfg.threads)
        if table is None:
            table = ResultTable(axis=axis, metric=results[0].metric)
        row = table.add_row(point.variant, point.value, results, **point.columns)
        logger.info("%s %s=%s: %.4f +- %.4f", point.variant, axis, point.value, row['mean'], row['std'])
    table.finalize()
    table.metadata['config'] = cfg.to_dict()
    table.write(out_dir)
    return table


def _require_axis(cfg: ExperimentConfig, allowed: tuple, default_axis: str) -> SweepConfig:
    sweep = cfg.sweep or SweepConfig(axis=default_axis, values=DEFAULT_SWEEPS[default_axis])
    if sweep.axis not in allowed:
        raise ConfigError(f"this sweep needs one of {allowed}, got '{sweep.axis}'", field='sweep')
    return sweep


def noise_sweep(cfg: ExperimentConfig, out_dir: str, use_cache: bool = True) -> ResultTable:
    """
    The feature-noise sweep: for every sigma and variant, add (feature_add) or append (feature_concat)
    N(0, sigma) noise with a fresh draw per run. Concatenation doubles the model input width.
    """
    sweep = _require_axis(cfg, ('feature_add', 'feature_concat'), 'feature_add')
    dataset = load_dataset(cfg.dataset, cfg.task)
    variants = sweep.variants or list(VARIANTS)
    points = []
    for variant in variants:
        model = variant_config(cfg.model, variant)
        if sweep.axis == 'feature_concat':
            model = model.with_changes(in_dim=2 * cfg.model.in_dim)
        for sigma in sweep.values:
            sigma = float(sigma)

            def prepare(seed: int, sigma=sigma) -> Dataset:
                return apply_perturbation(dataset, PerturbSpec(mode=sweep.axis, sigma=sigma, seed=seed))

            points.append(SweepPoint(variant, sigma, model, prepare))
    return _sweep(cfg, sweep.axis, points, out_dir, use_cache)


def edge_noise_sweep(cfg: ExperimentConfig, out_dir: str, use_cache: bool = True) -> ResultTable:
    """
    The edge-noise sweep: for every ratio K add round(K * |E|) random edges, a fresh draw per run.
    Node classification only, since added edges could coincide with held-out link positives.
    """
    sweep = _require_axis(cfg, ('edge_noise',), 'edge_noise')
    if cfg.task != 'node_class':
        raise ConfigError("edge-noise sweeps apply to node classification", field='task')
    dataset = load_dataset(cfg.dataset, cfg.task)
    variants = sweep.variants or list(EDGE_NOISE_VARIANTS)
    points = []
    for variant in variants:
        model = variant_config(cfg.model, variant)
        for ratio in sweep.values:
            ratio = float(ratio)
            added = added_edge_count(dataset.graph, ratio)

            def prepare(seed: int, ratio=ratio) -> Dataset:
                return apply_perturbation(dataset, PerturbSpec(mode='edge_add', ratio=ratio, seed=seed))

            points.append(SweepPoint(variant, ratio, model, prepare,
                                     columns={'added_edges': added, 'added_edges_directed': 2 * added}))
    return _sweep(cfg, 'edge_noise', points, out_dir, use_cache)


def depth_sweep(cfg: ExperimentConfig, out_dir: str, use_cache: bool = True) -> ResultTable:
    """
    The depth sweep: NGNN depth k (k = 0 is the vanilla stack) for each hidden width, reporting the
    metric, the exact parameter count and the epoch time. A `hidden` axis alone sweeps the width at
    the configured depth.
    """
    sweep = _require_axis(cfg, ('ngnn_depth', 'hidden'), 'ngnn_depth')
    if cfg.train.epochs < TIMING_EPOCHS:
        raise ConfigError(f"epoch times need a warm-up plus 5 timed epochs; set train.epochs >= {TIMING_EPOCHS}",
                          field='train.epochs')
    dataset = load_dataset(cfg.dataset, cfg.task)
    points = []
    if sweep.axis == 'hidden':
        k = len(cfg.model.block_activations)
        for hidden in sweep.values:
            points.append(SweepPoint(f"ngnn_depth={k}", int(hidden), depth_config(cfg.model, k, int(hidden)),
                                     lambda seed: dataset))
        return _sweep(cfg, 'hidden', points, out_dir, use_cache)

    for hidden in sweep.hidden or [cfg.model.hidden_dim]:
        for k in sweep.values:
            points.append(SweepPoint(f"hidden={int(hidden)}", int(k), depth_config(cfg.model, int(k), int(hidden)),
                                     lambda seed: dataset))
    return _sweep(cfg, 'ngnn_depth', points, out_dir, use_cache)


def position_sweep(cfg: ExperimentConfig, out_dir: str, use_cache: bool = True) -> ResultTable:
    """
    The position sweep: the configured model with its NGNN block at each position policy, all rows
    trained on the same seeds.
    """
    sweep = _require_axis(cfg, ('position',), 'position')
    dataset = load_dataset(cfg.dataset, cfg.task)
    points = []
    for position in sweep.values:
        model = cfg.model.with_changes(ngnn_position=position)
        points.append(SweepPoint('model', model.ngnn_position, model, lambda seed: dataset))
    return _sweep(cfg, 'position', points, out_dir, use_cache)
