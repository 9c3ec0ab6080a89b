import os
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from ngnn.graph import added_edge_count, generate_sbm, save_node_dataset
from ngnn.model import model_param_count
from ngnn.train import RunResult, paired_sign_test
from ngnn.utils import read_json, write_json
from ngnn.utils.errors import ConfigError, DatasetError
from ngnn.workflow import (
    DatasetConfig,
    ExperimentConfig,
    SweepConfig,
    depth_sweep,
    edge_noise_sweep,
    load_experiment,
    noise_sweep,
    position_sweep,
    scaffold_experiment,
    summarize,
    train,
)
from ngnn.workflow.sweeps import depth_config, variant_config
from tests.conftest import experiment


def test_experiment_config_from_dict(node_dir):
    cfg = ExperimentConfig.from_dict(experiment(str(node_dir), sweep={'feature_add': [0, 1]}))
    assert cfg.dataset.root == str(node_dir)
    assert cfg.model.hidden_dim == 16
    assert cfg.train.epochs == 3
    assert cfg.seeds == [0, 1]
    assert cfg.sweep.axis == 'feature_add'
    assert cfg.with_overrides(seed=5, runs=3).seeds == [5, 6, 7]
    assert cfg.with_overrides(threads=None).threads == 1
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize('changes, field', [
    ({'task': 'graph_class'}, 'task'),
    ({'runs': 0}, 'runs'),
    ({'extra': 1}, 'config'),
    ({'model': {'arch': 'sage', 'ngnn_position': 'hidden', 'ngnn_spec': '1-'}}, 'model.ngnn_spec'),
    ({'train': {'method': 'cluster'}}, 'train.num_clusters'),
    ({'dataset': {}}, 'dataset'),
    ({'sweep': {'feature_add': [0, 1], 'edge_noise': [0.1]}}, 'sweep'),
    ({'sweep': {'position': []}}, 'sweep.position'),
    ({'sweep': {'feature_add': [0], 'sigma': [1]}}, 'sweep'),
])
def test_experiment_config_errors(changes, field):
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict(experiment('data', **changes))
    assert e.value.field == field


def test_sweep_axes():
    grid = SweepConfig.from_dict({'ngnn_depth': [0, 1, 2], 'hidden': [8, 16]})
    assert (grid.axis, grid.hidden) == ('ngnn_depth', [8, 16])
    widths = SweepConfig.from_dict({'hidden': [8, 16]})
    assert (widths.axis, widths.values, widths.hidden) == ('hidden', [8, 16], None)
    assert SweepConfig.from_dict(grid.to_dict()) == grid
    assert DatasetConfig.from_dict('data') == DatasetConfig(root='data')


def test_load_experiment_and_scaffold(write_experiment):
    config = scaffold_experiment(arch='gat', task='link_pred', position='all', spec='1-relu+1-sigmoid',
                                 dataset='data/link', out_dim=64)
    cfg = load_experiment(str(write_experiment(config)))
    assert cfg.task == 'link_pred'
    assert cfg.model.block_activations == ['relu', 'sigmoid']
    assert cfg.sweep.values == [0.0, 1.0, 2.0, 4.0]
    with pytest.raises(ConfigError):
        scaffold_experiment(spec='2-swish')


def _run_results(out_dir, aggregate):
    return [RunResult.from_dict(read_json(os.path.join(out_dir, f))) for f in aggregate['run_files']]


def test_train_aggregates_the_run_files(tmp_path, node_dir):
    cfg = ExperimentConfig.from_dict(experiment(str(node_dir)))
    out = str(tmp_path / 'out')
    aggregate = train(cfg, out)
    assert aggregate['runs'] == 2
    assert aggregate['seeds'] == [0, 1]
    runs = _run_results(out, aggregate)
    tests = [r.test_metric for r in runs]
    assert [r.seed for r in runs] == [0, 1]
    assert aggregate['test_metrics'] == tests
    assert aggregate['mean'] == pytest.approx(np.mean(tests))
    assert aggregate['std'] == pytest.approx(np.std(tests))
    assert aggregate['params'] == model_param_count(cfg.model)
    assert read_json(os.path.join(out, 'aggregate.json'))['config_hash'] == aggregate['config_hash']

    threaded = train(cfg.with_overrides(threads=2), str(tmp_path / 'threaded'))
    assert threaded['test_metrics'] == tests


def test_train_resumes_finished_runs(tmp_path, node_dir):
    cfg = ExperimentConfig.from_dict(experiment(str(node_dir)))
    out = str(tmp_path / 'out')
    first = train(cfg, out)
    path = os.path.join(out, first['run_files'][0])
    record = read_json(path)
    record['test_metric'] = 0.125
    write_json(path, record)

    assert train(cfg, out)['test_metrics'][0] == 0.125
    assert train(cfg, out, use_cache=False)['test_metrics'][0] == first['test_metrics'][0]


def test_cached_runs_follow_the_dataset_contents(tmp_path, sbm_spec):
    root = tmp_path / 'data'
    save_node_dataset(generate_sbm(sbm_spec), str(root))
    cfg = ExperimentConfig.from_dict(experiment(str(root), runs=1))
    out = str(tmp_path / 'out')
    first = train(cfg, out)
    assert train(cfg, out)['config_hash'] == first['config_hash']

    # same paths, regenerated contents
    save_node_dataset(generate_sbm(replace(sbm_spec, seed=1)), str(root))
    second = train(cfg, out)
    assert second['config_hash'] != first['config_hash']
    assert len(os.listdir(os.path.join(out, 'runs'))) == 2


def _run(seed, epoch_seconds):
    return RunResult(config_hash='h', seed=seed, epochs=len(epoch_seconds), metric='accuracy',
                     train_loss=[1.0] * len(epoch_seconds), valid_curve=[0.5], best_valid=0.5,
                     best_epoch=len(epoch_seconds), test_metric=0.25 * (seed + 1), epoch_seconds=epoch_seconds,
                     param_count=10)


def test_summarize_reports_the_epoch_time_spread():
    stats = summarize([_run(1, [9.0, 1.0, 3.0]), _run(0, [7.0, 2.0, 4.0])])
    # warm-up epochs dropped, the remaining samples pooled
    assert stats['epoch_s'] == pytest.approx(2.5)
    assert stats['epoch_s_std'] == pytest.approx(np.std([2.0, 4.0, 1.0, 3.0]))
    assert stats['seeds'] == [0, 1]
    assert stats['test_metrics'] == [0.25, 0.5]


def test_train_link_prediction(tmp_path, link_dir):
    config = experiment(str(link_dir), task='link_pred', runs=1,
                        model={'arch': 'sage', 'in_dim': 8, 'hidden_dim': 16, 'out_dim': 16, 'num_layers': 2},
                        train={'epochs': 2, 'hits_k': 20})
    aggregate = train(ExperimentConfig.from_dict(config), str(tmp_path / 'out'))
    assert aggregate['metric'] == 'hits@20'


def test_train_with_a_missing_dataset(tmp_path):
    cfg = ExperimentConfig.from_dict(experiment(str(tmp_path / 'nowhere')))
    with pytest.raises(DatasetError):
        train(cfg, str(tmp_path / 'out'))


def test_noise_sweep(tmp_path, node_dir):
    config = experiment(str(node_dir), sweep={'feature_add': [0.0, 1.0], 'variants': ['baseline', 'ngnn-1']})
    cfg = ExperimentConfig.from_dict(config)
    out = str(tmp_path / 'noise')
    table = noise_sweep(cfg, out)

    assert [(r['variant'], r['sweep_value']) for r in table.rows] == [
        ('baseline', 0.0), ('baseline', 1.0), ('ngnn-1', 0.0), ('ngnn-1', 1.0)]
    assert table.rows[0]['drop'] == 0.0
    assert table.rows[1]['drop'] == pytest.approx(table.rows[0]['mean'] - table.rows[1]['mean'])
    assert table.rows[2]['params'] == model_param_count(variant_config(cfg.model, 'ngnn-1'))
    assert set(table.metadata['sign_tests']['ngnn-1']) == {'1.0'}

    # sigma = 0 leaves the features untouched, so the baseline row reproduces plain training
    plain = train(cfg, str(tmp_path / 'plain'))
    assert table.per_seed['baseline|0.0'] == plain['test_metrics']

    frame = pd.read_csv(os.path.join(out, 'results.csv'))
    saved = read_json(os.path.join(out, 'results.json'))
    assert list(frame.columns) == saved['columns']
    np.testing.assert_allclose(frame['mean'], [r['mean'] for r in saved['rows']], rtol=1e-12)
    np.testing.assert_allclose(frame['params'], [r['params'] for r in saved['rows']])
    assert 'Desk-scale' in open(os.path.join(out, 'results.md')).read()


def test_noise_sweep_compares_paired_drops(tmp_path, node_dir):
    config = experiment(str(node_dir), runs=4, train={'epochs': 2},
                        sweep={'feature_add': [0.0, 4.0], 'variants': ['baseline', 'ngnn-2']})
    table = noise_sweep(ExperimentConfig.from_dict(config), str(tmp_path / 'robust'))
    drops = np.subtract(table.per_seed['ngnn-2|0.0'], table.per_seed['ngnn-2|4.0'])
    base_drops = np.subtract(table.per_seed['baseline|0.0'], table.per_seed['baseline|4.0'])
    comparison = table.metadata['sign_tests']['ngnn-2']['4.0']
    assert comparison['gap'] == pytest.approx(base_drops.mean() - drops.mean())
    assert comparison['p_value'] == pytest.approx(paired_sign_test(drops, base_drops))
    assert 0.0 < comparison['p_value'] <= 1.0
    by_key = {(r['variant'], r['sweep_value']): r for r in table.rows}
    assert by_key[('ngnn-2', 4.0)]['drop'] == pytest.approx(drops.mean())


def test_concat_noise_doubles_the_input_width(tmp_path, node_dir):
    config = experiment(str(node_dir), runs=1, sweep={'feature_concat': [0.5], 'variants': ['baseline']})
    cfg = ExperimentConfig.from_dict(config)
    table = noise_sweep(cfg, str(tmp_path / 'concat'))
    assert table.rows[0]['params'] == model_param_count(cfg.model.with_changes(in_dim=16))


def test_edge_noise_sweep(tmp_path, node_dir, sbm_dataset):
    config = experiment(str(node_dir), runs=1, sweep={'edge_noise': [0.0, 0.1], 'variants': ['baseline']})
    table = edge_noise_sweep(ExperimentConfig.from_dict(config), str(tmp_path / 'edges'))
    added = added_edge_count(sbm_dataset.graph, 0.1)
    assert [r['added_edges'] for r in table.rows] == [0, added]
    assert [r['added_edges_directed'] for r in table.rows] == [0, 2 * added]
    assert 'added_edges' in table.columns()

    with pytest.raises(ConfigError):
        edge_noise_sweep(ExperimentConfig.from_dict(dict(config, task='link_pred')), str(tmp_path / 'link'))


def test_depth_sweep(tmp_path, node_dir):
    config = experiment(str(node_dir), runs=1, train={'epochs': 6},
                        sweep={'ngnn_depth': [0, 1, 2], 'hidden': [8, 16]})
    cfg = ExperimentConfig.from_dict(config)
    table = depth_sweep(cfg, str(tmp_path / 'depth'))
    assert table.variants() == ['hidden=8', 'hidden=16']
    for row in table.rows:
        hidden = int(row['variant'].split('=')[1])
        assert row['params'] == model_param_count(depth_config(cfg.model, row['sweep_value'], hidden))
        assert row['epoch_s'] >= 0.0 and row['epoch_s_std'] >= 0.0
    by_key = {(r['variant'], r['sweep_value']): r['params'] for r in table.rows}
    assert by_key[('hidden=16', 2)] - by_key[('hidden=16', 0)] == 2 * (16 * 16 + 16)

    with pytest.raises(ConfigError) as e:
        depth_sweep(ExperimentConfig.from_dict(dict(config, train={'epochs': 5})), str(tmp_path / 'short'))
    assert e.value.field == 'train.epochs'


def test_width_sweep_keeps_the_configured_depth(tmp_path, node_dir):
    model = {'arch': 'gcn', 'in_dim': 8, 'hidden_dim': 16, 'out_dim': 2, 'num_layers': 3,
             'ngnn_position': 'hidden', 'ngnn_spec': '2-relu'}
    config = experiment(str(node_dir), runs=1, model=model, train={'epochs': 6}, sweep={'hidden': [8, 16]})
    table = depth_sweep(ExperimentConfig.from_dict(config), str(tmp_path / 'width'))
    assert table.axis == 'hidden'
    assert table.variants() == ['ngnn_depth=2']
    assert [r['sweep_value'] for r in table.rows] == [8, 16]


def test_position_sweep(tmp_path, node_dir):
    config = experiment(str(node_dir), runs=1, train={'epochs': 2},
                        sweep={'position': ['none', 'hidden-only', 'all']})
    cfg = ExperimentConfig.from_dict(config)
    table = position_sweep(cfg, str(tmp_path / 'position'))
    assert [r['sweep_value'] for r in table.rows] == ['none', 'hidden', 'all']
    assert table.rows[0]['params'] < table.rows[1]['params'] < table.rows[2]['params']

    with pytest.raises(ConfigError):
        noise_sweep(cfg, str(tmp_path / 'wrong'))
