import numpy as np
import pytest

from ngnn.graph import (
    PerturbSpec,
    SbmSpec,
    apply_perturbation,
    build_graph,
    cluster_partition,
    count_non_edges,
    gcn_normalize,
    generate_sbm,
    load_link_dataset,
    load_node_dataset,
    make_link_split,
    negative_sample_edges,
    neighbor_sample,
    perturb_edges,
    perturb_features_add,
    perturb_features_concat,
    permute_nodes,
    read_edge_list,
    save_link_dataset,
    save_node_dataset,
)
from ngnn.graph.perturb import added_edge_count
from ngnn.tensor import Tensor
from ngnn.utils.errors import ConfigError, DatasetError, GraphError
from tests.conftest import SMALL_EDGES, random_graph


def test_build_graph_dedupes_and_drops_self_loops():
    g = build_graph([(0, 1), (1, 0), (0, 1), (2, 2), (1, 2)], 4)
    assert g.num_edges == 4
    assert g.num_undirected_edges == 2
    assert g.edge_set() == {(0, 1), (1, 2)}
    assert g.is_symmetric()
    np.testing.assert_array_equal(g.degrees(), [1, 2, 1, 0])
    np.testing.assert_array_equal(g.neighbors(1), [0, 2])


def test_build_graph_rejects_out_of_range_endpoints():
    with pytest.raises(GraphError):
        build_graph([(0, 4)], 4)
    with pytest.raises(GraphError):
        build_graph([(-1, 0)], 4)


def test_build_graph_without_symmetrize_needs_both_directions():
    with pytest.raises(GraphError):
        build_graph([(0, 1)], 3, symmetrize=False)
    g = build_graph([(0, 1), (1, 0)], 3, symmetrize=False)
    assert g.num_undirected_edges == 1
    np.testing.assert_array_equal(g.degrees(), [1, 1, 0])


def test_has_edges(small_graph):
    np.testing.assert_array_equal(small_graph.has_edges([0, 2, 0, 5], [1, 3, 5, 4]), [True, True, False, True])
    assert not build_graph([], 3).has_edges([0], [1]).any()


def test_gcn_matrix_matches_dense_normalization(small_graph):
    g = gcn_normalize(small_graph)
    a_hat = small_graph.to_dense() + np.eye(6)
    d = a_hat.sum(axis=1)
    expected = a_hat / np.sqrt(np.outer(d, d))
    np.testing.assert_allclose(g.block.gcn_matrix.toarray(), expected)
    # d~2 = 4 and d~3 = 3
    assert g.block.gcn_matrix[2, 3] == pytest.approx(1 / np.sqrt(12))


def test_gcn_matrix_needs_normalization(small_graph):
    with pytest.raises(GraphError):
        small_graph.block.gcn_matrix


def test_mean_matrix_rows(small_graph):
    m = small_graph.block.mean_matrix.toarray()
    np.testing.assert_allclose(m.sum(axis=1), np.ones(6))
    assert m[2, 0] == pytest.approx(1 / 3)
    isolated = build_graph([(0, 1)], 3).block.mean_matrix.toarray()
    np.testing.assert_array_equal(isolated[2], np.zeros(3))


def test_attention_edges_add_one_self_loop_per_node(small_graph):
    src, dst = small_graph.block.attention_edges
    assert src.shape[0] == small_graph.num_edges + 6
    assert np.all(np.diff(dst) >= 0)
    loops = src == dst
    np.testing.assert_array_equal(np.sort(dst[loops]), np.arange(6))


def test_full_fanout_sampling_keeps_every_neighbor():
    g = random_graph(30, 0.15, seed=1)
    seeds = [7, 3, 21]
    sample = neighbor_sample(g, seeds, [None, -1], np.random.default_rng(0))
    assert sample.num_hops == 2
    np.testing.assert_array_equal(sample.seeds, seeds)
    for block in sample.blocks:
        np.testing.assert_array_equal(block.degrees(), g.degrees()[block.dst_ids])
        for i, v in enumerate(block.dst_ids):
            got = block.src_ids[block.indices[block.offsets[i]:block.offsets[i + 1]]]
            np.testing.assert_array_equal(np.sort(got), g.neighbors(v))
    # each hop's sources are the next hop's destinations
    np.testing.assert_array_equal(sample.blocks[0].dst_ids, sample.blocks[1].src_ids)


def test_fanout_caps_the_sampled_degree():
    g = random_graph(40, 0.3, seed=2)
    sample = neighbor_sample(g, np.arange(10), [3, 2], np.random.default_rng(0))
    out_block = sample.blocks[-1]
    np.testing.assert_array_equal(out_block.degrees(), np.minimum(g.degrees()[:10], 2))
    for block in sample.blocks:
        src = block.src_ids[block.indices]
        dst = block.dst_ids[block.edge_dst]
        assert g.has_edges(dst, src).all()
        assert np.unique(block.src_ids).shape[0] == block.num_src


def test_fanout_draws_neighbors_uniformly():
    star = build_graph([(0, v) for v in range(1, 6)], 6)
    gen = np.random.default_rng(0)
    counts = np.zeros(6)
    trials = 10_000
    for _ in range(trials):
        block = neighbor_sample(star, [0], [2], gen).blocks[0]
        counts[block.src_ids[block.indices]] += 1
    assert counts[0] == 0
    # 2 of 5 neighbors per draw
    np.testing.assert_allclose(counts[1:] / trials, 0.4, rtol=0, atol=0.02)


def test_sampling_and_partitions_repeat_for_a_seed():
    g = random_graph(80, 0.08, seed=3)
    seeds = np.arange(0, 80, 7)
    a = neighbor_sample(g, seeds, [3, 2], np.random.default_rng(11))
    b = neighbor_sample(g, seeds, [3, 2], np.random.default_rng(11))
    for x, y in zip(a.blocks, b.blocks):
        np.testing.assert_array_equal(x.src_ids, y.src_ids)
        np.testing.assert_array_equal(x.offsets, y.offsets)
        np.testing.assert_array_equal(x.indices, y.indices)
    first = cluster_partition(g, 5, np.random.default_rng(2))
    second = cluster_partition(g, 5, np.random.default_rng(2))
    assert all(np.array_equal(p, q) for p, q in zip(first, second))


def test_neighbor_sample_rejects_bad_seeds(small_graph):
    with pytest.raises(GraphError):
        neighbor_sample(small_graph, [], [None], np.random.default_rng(0))
    with pytest.raises(GraphError):
        neighbor_sample(small_graph, [1, 1], [None], np.random.default_rng(0))
    with pytest.raises(GraphError):
        neighbor_sample(small_graph, [6], [None], np.random.default_rng(0))


def test_sampled_blocks_carry_gcn_coefficients(small_graph):
    g = gcn_normalize(small_graph)
    sample = neighbor_sample(g, np.arange(6), [None], np.random.default_rng(0))
    np.testing.assert_allclose(sample.blocks[0].gcn_matrix.toarray(), g.block.gcn_matrix.toarray())


@pytest.mark.parametrize('k', [1, 3, 7])
def test_cluster_partition_is_a_balanced_cover(k):
    g = random_graph(50, 0.1, seed=3)
    parts = cluster_partition(g, k, np.random.default_rng(0))
    assert len(parts) == k
    sizes = [p.shape[0] for p in parts]
    assert max(sizes) - min(sizes) <= 1
    np.testing.assert_array_equal(np.sort(np.concatenate(parts)), np.arange(50))


def test_cluster_partition_bounds(small_graph):
    with pytest.raises(GraphError):
        cluster_partition(small_graph, 0, np.random.default_rng(0))
    with pytest.raises(GraphError):
        cluster_partition(small_graph, 7, np.random.default_rng(0))


def test_negative_sampling_exhausts_the_non_edges(small_graph):
    assert count_non_edges(small_graph) == 9
    pairs = negative_sample_edges(small_graph, 9, np.random.default_rng(0))
    assert pairs.shape == (9, 2)
    assert np.all(pairs[:, 0] < pairs[:, 1])
    assert not small_graph.has_edges(pairs[:, 0], pairs[:, 1]).any()
    assert len({tuple(p) for p in pairs.tolist()}) == 9
    with pytest.raises(GraphError):
        negative_sample_edges(small_graph, 10, np.random.default_rng(0))


def test_perturb_edges_adds_rounded_ratio(small_graph):
    assert added_edge_count(small_graph, 0.5) == 3
    assert added_edge_count(small_graph, 0.25) == 2
    noisy = perturb_edges(small_graph, 0.5, np.random.default_rng(0))
    assert noisy.num_undirected_edges == 9
    assert small_graph.edge_set() <= noisy.edge_set()
    assert perturb_edges(small_graph, 0.0, np.random.default_rng(0)) is small_graph
    assert perturb_edges(gcn_normalize(small_graph), 0.5, np.random.default_rng(0)).is_normalized


def test_apply_perturbation_leaves_the_other_half_alone(sbm_dataset):
    concat = apply_perturbation(sbm_dataset, PerturbSpec(mode='feature_concat', sigma=1.0, seed=1))
    assert concat.features.cols == 2 * sbm_dataset.num_features
    np.testing.assert_array_equal(concat.features.data[:, :sbm_dataset.num_features], sbm_dataset.features.data)
    assert concat.graph is sbm_dataset.graph

    clean = apply_perturbation(sbm_dataset, PerturbSpec(mode='feature_add', sigma=0.0, seed=1))
    np.testing.assert_array_equal(clean.features.data, sbm_dataset.features.data)

    edges = apply_perturbation(sbm_dataset, PerturbSpec(mode='edge_add', ratio=0.1, seed=1))
    assert edges.features is sbm_dataset.features
    assert edges.graph.num_undirected_edges == sbm_dataset.graph.num_undirected_edges + \
        added_edge_count(sbm_dataset.graph, 0.1)


def test_feature_noise_statistics():
    sigma = 2.0
    x = Tensor(np.random.default_rng(0).standard_normal((500, 200)))
    noise = perturb_features_add(x, sigma, np.random.default_rng(1)).data - x.data
    assert abs(noise.std() - sigma) < 0.02 * sigma

    appended = perturb_features_concat(x, sigma, np.random.default_rng(2)).data[:, 200:]
    assert appended.shape == (500, 200)
    assert abs(appended.mean()) < 3 * sigma / np.sqrt(appended.size)
    assert abs(appended.std() - sigma) < 0.02 * sigma


def test_perturb_spec_validation():
    with pytest.raises(ConfigError):
        PerturbSpec(mode='label_flip')
    with pytest.raises(ConfigError):
        PerturbSpec(mode='feature_add', sigma=-1.0)
    with pytest.raises(ConfigError):
        PerturbSpec(mode='edge_add', sigma=1.0)


def test_permute_nodes_relabels_everything(sbm_dataset):
    perm = np.random.default_rng(5).permutation(sbm_dataset.num_nodes)
    moved = permute_nodes(sbm_dataset, perm)
    assert moved.graph.edge_set() == {tuple(sorted((int(perm[u]), int(perm[v]))))
                                      for u, v in sbm_dataset.graph.edge_set()}
    np.testing.assert_array_equal(moved.features.data[perm], sbm_dataset.features.data)
    np.testing.assert_array_equal(moved.labels[perm], sbm_dataset.labels)
    np.testing.assert_array_equal(moved.split['train'], np.sort(perm[sbm_dataset.split['train']]))
    with pytest.raises(GraphError):
        permute_nodes(sbm_dataset, np.zeros(sbm_dataset.num_nodes, dtype=int))


def test_node_dataset_files_round_trip(tmp_path, sbm_dataset):
    save_node_dataset(sbm_dataset, str(tmp_path))
    loaded = load_node_dataset(str(tmp_path))
    assert loaded.graph.edge_set() == sbm_dataset.graph.edge_set()
    np.testing.assert_array_equal(loaded.features.data, sbm_dataset.features.data)
    np.testing.assert_array_equal(loaded.labels, sbm_dataset.labels)
    for name in ('train', 'valid', 'test'):
        np.testing.assert_array_equal(loaded.split[name], sbm_dataset.split[name])


def test_link_dataset_files_round_trip(tmp_path, link_dataset):
    save_link_dataset(link_dataset, str(tmp_path))
    loaded = load_link_dataset(str(tmp_path))
    assert loaded.graph.edge_set() == link_dataset.graph.edge_set()
    for name in ('valid_pos', 'valid_neg', 'test_pos', 'test_neg'):
        np.testing.assert_array_equal(getattr(loaded, name), getattr(link_dataset, name))


def test_dataset_file_errors(tmp_path, sbm_dataset):
    with pytest.raises(DatasetError):
        load_node_dataset(str(tmp_path / 'missing'))
    save_node_dataset(sbm_dataset, str(tmp_path))
    (tmp_path / 'features.bin').write_bytes(b"NGNNF1" + b"\x00" * 4)
    with pytest.raises(DatasetError):
        load_node_dataset(str(tmp_path))


def test_edge_and_id_lists_need_the_right_columns(tmp_path, sbm_dataset):
    path = tmp_path / 'pairs.txt'
    path.write_text("0 1 2\n3 4 5\n")
    with pytest.raises(DatasetError):
        read_edge_list(str(path))
    path.write_text("0 1\n3 4\n")
    np.testing.assert_array_equal(read_edge_list(str(path)), [[0, 1], [3, 4]])

    root = tmp_path / 'data'
    save_node_dataset(sbm_dataset, str(root))
    (root / 'train.txt').write_text("0 1\n2 3\n")
    with pytest.raises(DatasetError):
        load_node_dataset(str(root))


def test_sbm_generator(sbm_spec):
    d = generate_sbm(sbm_spec)
    assert d.num_nodes == 120
    assert d.num_features == 8
    np.testing.assert_array_equal(np.bincount(d.labels), [60, 60])
    np.testing.assert_array_equal(np.sort(np.concatenate(list(d.split.values()))), np.arange(120))
    edges = d.graph.undirected_edges()
    same = d.labels[edges[:, 0]] == d.labels[edges[:, 1]]
    assert same.mean() > 0.8

    again = generate_sbm(sbm_spec)
    assert again.graph.edge_set() == d.graph.edge_set()
    np.testing.assert_array_equal(again.features.data, d.features.data)
    with pytest.raises(ConfigError):
        SbmSpec(num_nodes=10, p=1.5)


def test_link_split_holds_out_positives(sbm_dataset, link_dataset):
    full = sbm_dataset.graph
    held_out = link_dataset.valid_pos.shape[0] + link_dataset.test_pos.shape[0]
    assert link_dataset.graph.num_undirected_edges + held_out == full.num_undirected_edges
    assert link_dataset.valid_neg.shape == (60, 2)
    assert link_dataset.test_neg.shape == (60, 2)
    for pairs in (link_dataset.valid_neg, link_dataset.test_neg):
        assert not full.has_edges(pairs[:, 0], pairs[:, 1]).any()
    assert set(map(tuple, link_dataset.valid_neg.tolist())).isdisjoint(map(tuple, link_dataset.test_neg.tolist()))
    for pairs in (link_dataset.valid_pos, link_dataset.test_pos):
        assert full.has_edges(pairs[:, 0], pairs[:, 1]).all()


def test_link_split_needs_held_out_edges():
    sparse = build_graph([(0, 1), (2, 3), (4, 5), (6, 7)], 40)
    with pytest.raises(GraphError):
        make_link_split(sparse, Tensor(np.zeros((40, 4))), num_negatives=10)


def test_small_edges_fixture_shape(small_graph):
    assert small_graph.num_undirected_edges == len(SMALL_EDGES)
