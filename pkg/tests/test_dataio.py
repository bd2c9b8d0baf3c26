import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgxbench.dataio import (
    load_dataset,
    node_split,
    parse_tu,
    save_dataset,
    split,
    split_items,
)
from pgxbench.seeding import substream
from pgxbench.synth import gen_dataset


class TestSplit:
    def test_ten_items_eight_one_one(self):
        tr, va, te = split_items(10, (80, 10, 10), substream(0, "s"))
        assert (len(tr), len(va), len(te)) == (8, 1, 1)

    def test_same_seed_identical(self):
        ds = gen_dataset("tree-cycles", 1)
        a = split(ds, seed=5)
        b = split(ds, seed=5)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    @given(st.integers(1, 500), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_partition(self, n, seed):
        tr, va, te = split_items(n, (80, 10, 10), substream(seed, "p"))
        merged = np.concatenate([tr, va, te])
        assert len(merged) == n
        np.testing.assert_array_equal(np.sort(merged), np.arange(n))

    def test_bad_ratios(self):
        with pytest.raises(ValueError, match="sum to 100"):
            split_items(10, (80, 10, 5), substream(0, "r"))

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            split_items(0, (80, 10, 10), substream(0, "e"))

    def test_instance_split_covers_motif_nodes(self):
        ds = gen_dataset("tree-cycles", 3)
        tr, va, te = split(ds, seed=1)
        merged = np.sort(np.concatenate([tr, va, te]))
        np.testing.assert_array_equal(merged, np.sort(ds.instances))

    def test_node_split_covers_all_nodes(self):
        ds = gen_dataset("tree-cycles", 3)
        tr, va, te = node_split(ds, seed=1)
        merged = np.sort(np.concatenate([tr, va, te]))
        np.testing.assert_array_equal(merged, np.arange(ds.graphs[0].num_nodes))

    def test_node_split_rejects_graph_task(self):
        ds = gen_dataset("ba-2motifs", 0)
        with pytest.raises(ValueError):
            node_split(ds)


class TestRoundTrip:
    def test_save_load_bit_exact(self, tmp_path):
        ds = gen_dataset("tree-cycles", 9)
        path = tmp_path / "ds.json"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert back.name == ds.name and back.task == ds.task
        np.testing.assert_array_equal(back.instances, ds.instances)
        for a, b in zip(ds.graphs, back.graphs):
            np.testing.assert_array_equal(a.edges, b.edges)
            np.testing.assert_array_equal(a.features, b.features)
            np.testing.assert_array_equal(a.node_labels, b.node_labels)
            np.testing.assert_array_equal(a.motif_edge, b.motif_edge)

    def test_save_is_deterministic(self, tmp_path):
        ds = gen_dataset("tree-cycles", 9)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_dataset(ds, p1)
        save_dataset(gen_dataset("tree-cycles", 9), p2)
        assert p1.read_bytes() == p2.read_bytes()


def write_tu_bundle(directory, a_rows, indicator, graph_labels, node_labels, prefix="toy"):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{prefix}_A.txt").write_text("\n".join(f"{i}, {j}" for i, j in a_rows) + "\n")
    (directory / f"{prefix}_graph_indicator.txt").write_text("\n".join(map(str, indicator)) + "\n")
    (directory / f"{prefix}_graph_labels.txt").write_text("\n".join(map(str, graph_labels)) + "\n")
    (directory / f"{prefix}_node_labels.txt").write_text("\n".join(map(str, node_labels)) + "\n")
    return directory


class TestTuIngestion:
    def test_single_edge_graph(self, tmp_path):
        d = write_tu_bundle(tmp_path, [(1, 2), (2, 1)], [1, 1], [1], [0, 1])
        ds = parse_tu(d, name="toy")
        assert len(ds.graphs) == 1
        g = ds.graphs[0]
        assert g.num_nodes == 2 and g.num_edges == 2
        assert not g.motif_edge.any()

    def test_one_hot_features(self, tmp_path):
        d = write_tu_bundle(tmp_path, [(1, 2), (2, 1)], [1, 1], [1], [3, 7])
        g = parse_tu(d).graphs[0]
        np.testing.assert_allclose(g.features.sum(axis=1), 1.0)
        assert g.features.shape[1] == 2  # vocabulary size

    def test_multiple_graphs_and_label_remap(self, tmp_path):
        d = write_tu_bundle(
            tmp_path,
            [(1, 2), (2, 1), (3, 4), (4, 3), (4, 5), (5, 4)],
            [1, 1, 2, 2, 2],
            [-1, 1],
            [0, 0, 1, 1, 0],
        )
        ds = parse_tu(d)
        assert [g.graph_label for g in ds.graphs] == [0, 1]
        assert ds.graphs[1].num_nodes == 3
        assert ds.graphs[1].num_edges == 4

    def test_missing_reverse_added(self, tmp_path):
        d = write_tu_bundle(tmp_path, [(1, 2)], [1, 1], [1], [0, 0])
        g = parse_tu(d).graphs[0]
        assert g.num_edges == 2

    def test_cross_graph_edge_rejected_with_line(self, tmp_path):
        d = write_tu_bundle(tmp_path, [(1, 2), (2, 1), (2, 3)], [1, 1, 2], [1, 2], [0, 0, 0])
        with pytest.raises(ValueError, match=r"_A\.txt:3.*crosses graphs"):
            parse_tu(d)

    def test_wrong_label_count_rejected(self, tmp_path):
        d = write_tu_bundle(tmp_path, [(1, 2), (2, 1)], [1, 1], [1, 2], [0, 0])
        with pytest.raises(ValueError, match="graph_labels"):
            parse_tu(d)

    def test_non_integer_row_names_file_and_line(self, tmp_path):
        d = write_tu_bundle(tmp_path, [(1, 2), (2, 1)], [1, 1], [1], [0, 0])
        (d / "toy_A.txt").write_text("1, 2\nx, 1\n")
        with pytest.raises(ValueError, match=r"toy_A\.txt:2"):
            parse_tu(d)

    def test_missing_file_reported(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="_A.txt"):
            parse_tu(tmp_path)

    def test_endpoint_out_of_range(self, tmp_path):
        d = write_tu_bundle(tmp_path, [(1, 9), (9, 1)], [1, 1], [1], [0, 0])
        with pytest.raises(ValueError, match="out of range"):
            parse_tu(d)
