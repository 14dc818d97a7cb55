import numpy as np
import pytest

from shuffletest import (
    Graph,
    load_edge_list,
    prepare_multilayer,
    write_edge_list,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadEdgeList:
    def test_basic_path(self, tmp_path):
        g, labels = load_edge_list(write(tmp_path, "a.edges", "1 2\n2 3\n"))
        assert g.n == 3 and g.edge_count() == 2
        assert labels == {"1": 0, "2": 1, "3": 2}
        assert g.adjacency[0, 1] == 1 and g.adjacency[1, 2] == 1

    def test_dedup_and_loop_drop(self, tmp_path):
        g, labels = load_edge_list(write(tmp_path, "a.edges", "1 2\n2 1\n1 1\n"))
        assert g.edge_count() == 1
        assert set(labels) == {"1", "2"}

    def test_comments_and_blank_lines(self, tmp_path):
        g, _ = load_edge_list(write(tmp_path, "a.edges", "# header\n\nu v\n"))
        assert g.edge_count() == 1

    def test_malformed_line_reports_number(self, tmp_path):
        p = write(tmp_path, "a.edges", "1 2\n1 2 3\n")
        with pytest.raises(ValueError, match=r"a\.edges:2.*malformed"):
            load_edge_list(p)

    def test_empty_file_rejected(self, tmp_path):
        p = write(tmp_path, "a.edges", "# nothing\n")
        with pytest.raises(ValueError, match="empty"):
            load_edge_list(p)

    def test_self_loop_rejected_when_not_dropping(self, tmp_path):
        p = write(tmp_path, "a.edges", "1 1\n1 2\n")
        with pytest.raises(ValueError, match="self-loop"):
            load_edge_list(p, drop_self_loops=False)

    def test_reverse_orientation_rejected_when_not_symmetrizing(self, tmp_path):
        p = write(tmp_path, "a.edges", "1 2\n2 1\n")
        with pytest.raises(ValueError, match="reversed"):
            load_edge_list(p, symmetrize=False)

    def test_loop_vertex_kept_as_isolate(self, tmp_path):
        g, labels = load_edge_list(write(tmp_path, "a.edges", "3 3\n1 2\n"))
        assert g.n == 3
        assert g.adjacency[labels["3"]].sum() == 0


class TestRoundTrip:
    def test_write_then_load_is_identity(self, tmp_path, rng):
        n = 12
        a = rng.random((n, n)) < 0.3
        a = np.triu(a, 1)
        g = Graph((a + a.T).astype(np.uint8))
        labels = [f"v{i}" for i in range(n)]
        path = tmp_path / "g.edges"
        write_edge_list(g, labels, path)
        g2, labels2 = load_edge_list(path)
        # vertices with no edges cannot appear in an edge list; compare on
        # the vertices present
        idx = [labels2[lab] for lab in labels if lab in labels2]
        keep = [i for i, lab in enumerate(labels) if lab in labels2]
        assert np.array_equal(np.asarray(g.adjacency)[np.ix_(keep, keep)],
                              np.asarray(g2.adjacency)[np.ix_(idx, idx)])


class TestPrepareMultilayer:
    def test_identical_layers_unchanged_up_to_order(self, tmp_path):
        text = "b c\na b\n"
        g1 = load_edge_list(write(tmp_path, "l1.edges", text))
        g2 = load_edge_list(write(tmp_path, "l2.edges", text))
        ds = prepare_multilayer({"one": g1, "two": g2})
        assert ds.labels == ("a", "b", "c")
        assert np.array_equal(ds.layer("one").adjacency, ds.layer("two").adjacency)
        assert ds.layer("one").edge_count() == 2

    def test_disjoint_label_sets_rejected(self, tmp_path):
        g1 = load_edge_list(write(tmp_path, "l1.edges", "a b\n"))
        g2 = load_edge_list(write(tmp_path, "l2.edges", "x y\n"))
        with pytest.raises(ValueError, match="share no vertices"):
            prepare_multilayer({"one": g1, "two": g2})

    def test_single_layer_rejected(self, tmp_path):
        g1 = load_edge_list(write(tmp_path, "l1.edges", "a b\n"))
        with pytest.raises(ValueError, match="at least two"):
            prepare_multilayer({"one": g1})

    def test_common_core_survives(self, tmp_path):
        # three layers with a planted common core of 10 labels
        core = [f"c{i}" for i in range(10)]
        texts = []
        for extra in ("x", "y", "z"):
            lines = [f"{core[i]} {core[i + 1]}" for i in range(9)]
            lines += [f"{extra}0 {extra}1", f"{extra}1 {core[0]}"]
            texts.append("\n".join(lines) + "\n")
        layers = {
            name: load_edge_list(write(tmp_path, f"{name}.edges", text))
            for name, text in zip(("a", "b", "c"), texts)
        }
        ds = prepare_multilayer(layers)
        assert set(ds.labels) == set(core)

    def test_intersection_matches_set_oracle(self, tmp_path, rng):
        # synthetic partial-overlap layers: surviving set equals the exact
        # intersection of the label sets (no vertex is isolated everywhere)
        universe = [f"u{i}" for i in range(60)]
        layer_labels = [set(rng.choice(universe, size=45, replace=False))
                        for _ in range(3)]
        paths = []
        for li, labs in enumerate(layer_labels):
            labs = sorted(labs)
            lines = [f"{labs[i]} {labs[(i + 7) % len(labs)]}" for i in range(len(labs))]
            paths.append(write(tmp_path, f"m{li}.edges", "\n".join(lines) + "\n"))
        layers = {f"m{i}": load_edge_list(p) for i, p in enumerate(paths)}
        ds = prepare_multilayer(layers)
        expected = set.intersection(*layer_labels)
        assert set(ds.labels) == expected

    def test_globally_isolated_vertices_dropped(self, tmp_path):
        # vertex 'd' appears in both layers but only via dropped self-loops,
        # so it is isolated in every layer and removed
        g1 = load_edge_list(write(tmp_path, "l1.edges", "a b\nd d\n"))
        g2 = load_edge_list(write(tmp_path, "l2.edges", "a b\nd d\n"))
        ds = prepare_multilayer({"one": g1, "two": g2})
        assert set(ds.labels) == {"a", "b"}
