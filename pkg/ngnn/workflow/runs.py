"""
Seeded runs: load the dataset, train one model per seed (resuming finished runs from the run cache)
and aggregate the results.
"""
import os
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Sequence, Union

from ngnn.graph import LINK_FILES, NODE_FILES, LinkDataset, NodeDataset, dataset_fingerprint, load_link_dataset, \
    load_node_dataset
from ngnn.model import ModelConfig
from ngnn.train import RunResult, TrainConfig, train_link_predictor, train_node_classifier
from ngnn.utils.cache import RunCache
from ngnn.utils.system import config_hash, write_json
from ngnn.workflow.config import DatasetConfig, ExperimentConfig
from ngnn.workflow.report import summarize

logger = logging.getLogger(__name__)

Dataset = Union[NodeDataset, LinkDataset]

__all__ = ['load_dataset', 'run_seeds', 'train', 'experiment_hash']


def load_dataset(dataset: DatasetConfig, task: str) -> Dataset:
    """
    Load the node-classification or link-prediction dataset of an experiment.
    """
    loader = load_node_dataset if task == 'node_class' else load_link_dataset
    return loader(dataset.root, **dataset.files)


def experiment_hash(cfg: ExperimentConfig, mcfg: ModelConfig, **extra: Any) -> str:
    """
    The hash shared by all seeds of one configuration: model, training (without the seed), task,
    dataset paths and file contents, and any sweep-specific settings.
    """
    train_cfg = cfg.train.to_dict()
    train_cfg.pop('seed')
    files = NODE_FILES if cfg.task == 'node_class' else LINK_FILES
    return config_hash({
        'dataset': cfg.dataset.to_dict(),
        'data': dataset_fingerprint(cfg.dataset.root, files, cfg.dataset.files),
        'task': cfg.task,
        'model': mcfg.to_dict(),
        'train': train_cfg,
        **extra,
    })


def run_seeds(prepare: Callable[[int], Dataset], mcfg: ModelConfig, tcfg: TrainConfig, task: str,
              seeds: Sequence[int], cache: RunCache, hash_: str, threads: int = 1) -> List[RunResult]:
    """
    Train one run per seed.
    Args:
        prepare: builds the dataset of a seed (the loaded dataset, or a freshly perturbed copy).
        mcfg: the model configuration.
        tcfg: the training configuration; its seed is replaced by each run seed.
        task: node_class or link_pred.
        seeds: the run seeds.
        cache: finished runs are resumed from here and new runs stored to it.
        hash_: the configuration hash, part of every run key.
        threads: worker threads; runs share no mutable state.
    Returns:
        the results, sorted by seed.
    """
    trainer = train_node_classifier if task == 'node_class' else train_link_predictor

    def run(seed: int) -> RunResult:
        with cache(f"{hash_}-seed{seed}") as ca:
            record = ca.resume()
            if record is not None:
                logger.debug("resumed run %s-seed%d", hash_, seed)
                return RunResult.from_dict(record)
            result = trainer(prepare(seed), mcfg, tcfg.with_changes(seed=seed), hash_=hash_)
            ca.store(result.to_dict())
        return result

    if threads <= 1 or len(seeds) <= 1:
        results = [run(seed) for seed in seeds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, seeds))
    return sorted(results, key=lambda r: r.seed)


def train(cfg: ExperimentConfig, out_dir: str, use_cache: bool = True) -> Dict[str, Any]:
    """
    The train procedure: run seeds seed .. seed + runs - 1 with the configured model, write one JSON
    per run under `<out_dir>/runs` and the aggregate to `<out_dir>/aggregate.json`.
    :return: the aggregate.
    """
    dataset = load_dataset(cfg.dataset, cfg.task)
    cache = RunCache(out_dir, enabled=use_cache)
    hash_ = experiment_hash(cfg, cfg.model)
    results = run_seeds(lambda seed: dataset, cfg.model, cfg.train, cfg.task, cfg.seeds, cache, hash_, cfg.threads)

    aggregate = summarize(results)
    aggregate.update({
        'config_hash': hash_,
        'config': cfg.to_dict(),
        'run_files': [os.path.relpath(cache.path(f"{hash_}-seed{r.seed}"), out_dir) for r in results],
    })
    write_json(os.path.join(out_dir, 'aggregate.json'), aggregate)
    return aggregate
