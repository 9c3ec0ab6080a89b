import os

import pytest
from click.testing import CliRunner

import ngnn
from ngnn.cli import cli
from ngnn.utils import load_config, read_json
from tests.conftest import experiment


@pytest.fixture
def runner():
    return CliRunner()


PARAMCOUNT = ['paramcount', '--arch', 'sage', '--in-dim', '100', '--out-dim', '47', '--layers', '3',
              '--position', 'hidden']


def test_version(runner):
    result = runner.invoke(cli, ['--version'])
    assert result.exit_code == 0
    assert ngnn.__version__ in result.output


@pytest.mark.parametrize('hidden, spec, expected', [
    ('256', '1-relu+1-sigmoid', '338479'),
    ('512', '4-relu', '1726511'),
    ('128', '1-relu', '87215'),
])
def test_paramcount(runner, hidden, spec, expected):
    result = runner.invoke(cli, PARAMCOUNT + ['--hidden', hidden, '--spec', spec])
    assert result.exit_code == 0, result.output
    assert f"total parameters: {expected}" in result.output


def test_paramcount_reads_a_config_file(runner, write_experiment):
    config = experiment('data', model={'arch': 'gcn', 'in_dim': 8, 'hidden_dim': 16, 'out_dim': 2, 'num_layers': 3})
    result = runner.invoke(cli, ['paramcount', '--config', str(write_experiment(config))])
    assert result.exit_code == 0, result.output
    assert f"total parameters: {(8 * 16 + 16) + (16 * 16 + 16) + (16 * 2 + 2)}" in result.output


def test_invalid_spec_exits_with_2(runner):
    result = runner.invoke(cli, PARAMCOUNT + ['--hidden', '256', '--spec', '1-swish'])
    assert result.exit_code == 2


def test_invalid_config_exits_with_2(runner, write_experiment):
    path = write_experiment(experiment('data', sweep={'feature_add': [0.0], 'edge_noise': [0.1]}))
    result = runner.invoke(cli, ['train', '--config', str(path)])
    assert result.exit_code == 2


def test_missing_dataset_exits_with_1(runner, tmp_path, write_experiment):
    path = write_experiment(experiment(str(tmp_path / 'nowhere')))
    result = runner.invoke(cli, ['train', '--config', str(path), '--out', str(tmp_path / 'out')])
    assert result.exit_code == 1


def test_train_command(runner, tmp_path, node_dir, write_experiment):
    path = write_experiment(experiment(str(node_dir)))
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['train', '--config', str(path), '--out', str(out), '--runs', '1', '--seed', '3'])
    assert result.exit_code == 0, result.output
    aggregate = read_json(str(out / 'aggregate.json'))
    assert aggregate['seeds'] == [3]
    assert len(os.listdir(out / 'runs')) == 1


def test_position_sweep_command(runner, tmp_path, node_dir, write_experiment):
    config = experiment(str(node_dir), runs=1, train={'epochs': 1}, sweep={'position': ['none', 'hidden']})
    out = tmp_path / 'position'
    result = runner.invoke(cli, ['position-sweep', '--config', str(write_experiment(config)), '--out', str(out)])
    assert result.exit_code == 0, result.output
    for name in ('results.csv', 'results.json', 'results.md'):
        assert (out / name).exists()


def test_gen_synth(runner, tmp_path):
    out = tmp_path / 'synth'
    result = runner.invoke(cli, ['gen-synth', '--out', str(out), '--nodes', '100', '--dim', '8', '--p', '0.1',
                                 '--q', '0.01', '--link', '--negatives', '50'])
    assert result.exit_code == 0, result.output
    for name in ('edges.txt', 'features.bin', 'labels.txt', 'train.txt', 'valid.txt', 'test.txt', 'synth.yml'):
        assert (out / name).exists(), name
    for name in ('edges.txt', 'valid_pos.txt', 'valid_neg.txt', 'test_pos.txt', 'test_neg.txt'):
        assert (out / 'link' / name).exists(), name
    assert load_config(str(out / 'synth.yml'))['num_nodes'] == 100
    assert len((out / 'link' / 'test_neg.txt').read_text().splitlines()) == 50
