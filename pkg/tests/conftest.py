import numpy as np
import pytest

from ngnn.graph import SbmSpec, build_graph, generate_sbm, make_link_split, save_link_dataset, save_node_dataset
from ngnn.utils import write_config

# 6 nodes: a triangle 0-1-2 joined through 2-3 to the path 3-4-5
SMALL_EDGES = [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5)]


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_graph():
    return build_graph(SMALL_EDGES, 6)


def random_graph(num_nodes: int, p: float, seed: int):
    gen = np.random.default_rng(seed)
    u, v = np.triu_indices(num_nodes, k=1)
    keep = gen.random(u.shape[0]) < p
    return build_graph(np.stack([u[keep], v[keep]], axis=1), num_nodes)


@pytest.fixture
def sbm_spec():
    return SbmSpec(num_nodes=120, num_classes=2, dim=8, p=0.15, q=0.01, separation=2.0, seed=0)


@pytest.fixture
def sbm_dataset(sbm_spec):
    return generate_sbm(sbm_spec)


@pytest.fixture
def link_dataset(sbm_dataset):
    return make_link_split(sbm_dataset.graph, sbm_dataset.features, num_negatives=60, seed=0)


def experiment(root: str, **sections):
    """A small experiment configuration over the dataset at `root`."""
    config = {
        'dataset': {'root': root},
        'task': 'node_class',
        'model': {'arch': 'sage', 'in_dim': 8, 'hidden_dim': 16, 'out_dim': 2, 'num_layers': 3, 'heads': 2},
        'train': {'epochs': 3, 'lr': 0.01},
        'runs': 2,
        'seed': 0,
    }
    config.update(sections)
    return config


@pytest.fixture
def node_dir(tmp_path, sbm_dataset):
    root = tmp_path / 'data'
    save_node_dataset(sbm_dataset, str(root))
    return root


@pytest.fixture
def link_dir(tmp_path, link_dataset):
    root = tmp_path / 'link'
    save_link_dataset(link_dataset, str(root))
    return root


@pytest.fixture
def write_experiment(tmp_path):
    def write(config, name='experiment.yml'):
        path = tmp_path / name
        write_config(str(path), config)
        return path

    return write
