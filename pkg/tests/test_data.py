import json
import math
from pathlib import Path

import numpy as np
import pytest

from graphib import (Dataset, Graph, SyntheticConfig, build_graph, compute_fc,
                     generate_synthetic, load_dataset, save_dataset)
from graphib.data import read_matrix_csv, write_matrix_csv

from _oracles import pearson_fisher_z


class TestComputeFc:
    def test_perfect_correlation_is_clamped(self, rng):
        col = rng.standard_normal(12)
        other = rng.standard_normal(12)
        ts = np.stack([col, col, other], axis=1)
        fc = compute_fc(ts)
        assert fc[0, 1] == pytest.approx(math.atanh(1.0 - 1e-7), abs=1e-12)
        assert np.isfinite(fc).all()

    def test_orthogonal_shifted_columns_give_zero(self):
        x = np.array([1.0, -1.0, 1.0, -1.0]) + 2.0
        y = np.array([1.0, 1.0, -1.0, -1.0]) + 5.0
        fc = compute_fc(np.stack([x, y], axis=1))
        assert fc[0, 1] == 0.0

    def test_half_correlation_matches_scalar_formula(self):
        x = np.array([1.0, -1.0, 1.0, -1.0])
        z = np.array([1.0, 1.0, -1.0, -1.0])
        y = x + math.sqrt(3.0) * z  # sample Pearson r = 0.5 by construction
        fc = compute_fc(np.stack([x, y], axis=1))
        assert fc[0, 1] == pytest.approx(0.54931, abs=1e-4)
        assert fc[0, 1] == pytest.approx(pearson_fisher_z(x, y), abs=1e-12)

    def test_shift_invariance(self, rng):
        ts = rng.standard_normal((30, 5))
        shifted = ts + rng.uniform(-10, 10, size=5)
        assert np.abs(compute_fc(ts) - compute_fc(shifted)).max() < 1e-12

    def test_output_symmetric_with_zero_diagonal(self, rng):
        fc = compute_fc(rng.standard_normal((20, 6)))
        assert np.abs(fc - fc.T).max() == 0.0
        assert np.all(np.diag(fc) == 0.0)

    def test_zero_variance_column_names_roi(self, rng):
        ts = rng.standard_normal((10, 4))
        ts[:, 2] = 3.14
        with pytest.raises(ValueError, match="ROI 2"):
            compute_fc(ts)

    def test_too_few_time_points(self):
        with pytest.raises(ValueError, match="3 time points"):
            compute_fc(np.ones((2, 4)) + np.arange(8).reshape(2, 4))


class TestBuildGraph:
    def test_complete_rule(self, rng):
        fc = compute_fc(rng.standard_normal((10, 3)))
        g = build_graph(fc, label=0)
        assert g.adjacency.sum() == 6.0
        assert np.all(np.diag(g.adjacency) == 0.0)
        assert np.array_equal(g.node_features, fc)

    def test_top_fraction_one_equals_complete(self, rng):
        fc = compute_fc(rng.standard_normal((15, 5)))
        complete = build_graph(fc, label=0)
        thresholded = build_graph(fc, label=0, adjacency_rule="top_fraction",
                                  top_fraction=1.0)
        assert np.array_equal(complete.adjacency, thresholded.adjacency)

    def test_top_fraction_half_keeps_three_of_six(self, rng):
        fc = compute_fc(rng.standard_normal((25, 4)))
        g = build_graph(fc, label=1, adjacency_rule="top_fraction", top_fraction=0.5)
        assert g.adjacency.sum() == 6.0  # 3 undirected edges
        # brute-force sort of |fc| over pairs
        pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        top3 = sorted(pairs, key=lambda ij: -abs(fc[ij]))[:3]
        for i, j in pairs:
            assert g.adjacency[i, j] == (1.0 if (i, j) in top3 else 0.0)

    def test_rejects_asymmetric_fc(self):
        fc = np.zeros((3, 3))
        fc[0, 1] = 1.0
        with pytest.raises(ValueError, match="symmetric"):
            build_graph(fc, label=0)

    def test_rejects_unknown_rule(self):
        with pytest.raises(ValueError, match="adjacency_rule"):
            build_graph(np.zeros((3, 3)), label=0, adjacency_rule="weird")


class TestGraphValidation:
    def test_rejects_bad_label(self):
        adj = np.ones((3, 3)) - np.eye(3)
        with pytest.raises(ValueError, match="label"):
            Graph(adjacency=adj, node_features=np.zeros((3, 3)), label=2)

    def test_rejects_nonbinary_adjacency(self):
        adj = (np.ones((3, 3)) - np.eye(3)) * 0.5
        with pytest.raises(ValueError, match="binary"):
            Graph(adjacency=adj, node_features=np.zeros((3, 3)), label=0)

    def test_arrays_are_read_only(self, tiny_dataset):
        g = tiny_dataset.graphs[0]
        with pytest.raises(ValueError):
            g.node_features[0, 1] = 9.9


class TestSynthetic:
    def test_seed_determinism(self):
        cfg = SyntheticConfig(n_rois=10, n_per_class=5, planted_edges=3,
                              effect_size=1.0, noise_sd=0.5, seed=11)
        a, b = generate_synthetic(cfg), generate_synthetic(cfg)
        assert np.array_equal(a.truth_mask, b.truth_mask)
        for ga, gb in zip(a.graphs, b.graphs):
            assert np.array_equal(ga.node_features, gb.node_features)
            assert ga.label == gb.label and ga.group == gb.group

    def test_null_effect_classes_indistinguishable(self):
        cfg = SyntheticConfig(n_rois=12, n_per_class=60, planted_edges=8,
                              effect_size=0.0, noise_sd=1.0, seed=3)
        ds = generate_synthetic(cfg)
        planted = np.nonzero(np.triu(ds.truth_mask, 1))
        means = {0: [], 1: []}
        for g in ds.graphs:
            means[g.label].append(g.node_features[planted].mean())
        diff = abs(np.mean(means[1]) - np.mean(means[0]))
        # z-test style bound: 4 standard errors of the pooled difference
        se = 1.0 / math.sqrt(cfg.n_per_class * cfg.planted_edges / 2.0)
        assert diff < 4.0 * se

    def test_effect_size_recovered_from_emitted_dataset(self):
        cfg = SyntheticConfig(n_rois=20, n_per_class=100, planted_edges=10,
                              effect_size=1.5, noise_sd=1.0, seed=7)
        ds = generate_synthetic(cfg)
        planted = np.nonzero(np.triu(ds.truth_mask, 1))
        by_class = {0: [], 1: []}
        for g in ds.graphs:
            by_class[g.label].append(g.node_features[planted].mean())
        diff = np.mean(by_class[1]) - np.mean(by_class[0])
        assert abs(diff - 1.5) < 0.2

    def test_invariants_and_site_tags(self):
        cfg = SyntheticConfig(n_rois=8, n_per_class=6, planted_edges=4,
                              effect_size=1.0, noise_sd=1.0, seed=1, n_sites=2)
        ds = generate_synthetic(cfg)
        assert ds.truth_mask.sum() == 8.0  # 4 planted edges, both directions
        sites = set(ds.groups)
        assert len(sites) == 2
        for site in sites:
            labels = {g.label for g in ds.graphs if g.group == site}
            assert labels == {0, 1}
        for g in ds.graphs:
            assert np.abs(g.node_features - g.node_features.T).max() == 0.0
            assert np.all(np.diag(g.node_features) == 0.0)
            assert g.adjacency.sum() == 8 * 7

    def test_config_validation(self):
        with pytest.raises(ValueError, match="planted_edges"):
            SyntheticConfig(n_rois=4, n_per_class=5, planted_edges=100,
                            effect_size=1.0, noise_sd=1.0, seed=0)
        with pytest.raises(ValueError, match="noise_sd"):
            SyntheticConfig(n_rois=4, n_per_class=5, planted_edges=2,
                            effect_size=1.0, noise_sd=0.0, seed=0)


class TestDiskRoundTrip:
    def test_save_load_save_is_byte_identical(self, tmp_path, tiny_dataset):
        first = tmp_path / "first"
        second = tmp_path / "second"
        manifest = save_dataset(tiny_dataset, first)
        loaded = load_dataset(manifest)
        save_dataset(loaded, second)
        for f in sorted(first.iterdir()):
            assert (second / f.name).read_bytes() == f.read_bytes()
        for ga, gb in zip(tiny_dataset.graphs, loaded.graphs):
            assert np.array_equal(ga.node_features, gb.node_features)
            assert ga.label == gb.label and ga.group == gb.group
        assert np.array_equal(tiny_dataset.truth_mask, loaded.truth_mask)

    def test_matrix_precision_round_trip(self, tmp_path, rng):
        mat = rng.standard_normal((5, 5))
        write_matrix_csv(tmp_path / "m.csv", mat)
        assert np.array_equal(read_matrix_csv(tmp_path / "m.csv"), mat)

    def test_dimension_mismatch(self, tmp_path):
        write_matrix_csv(tmp_path / "a.csv", np.zeros((4, 4)))
        write_matrix_csv(tmp_path / "b.csv", np.zeros((5, 5)))
        manifest = {
            "n_rois": 4,
            "subjects": [
                {"file": "a.csv", "label": "x", "group": "s1"},
                {"file": "b.csv", "label": "y", "group": "s1"},
            ],
            "classes": ["x", "y"],
        }
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(manifest))
        with pytest.raises(ValueError, match="dimension mismatch"):
            load_dataset(path)

    def test_unknown_label(self, tmp_path):
        for name in ("a", "b", "c", "d"):
            write_matrix_csv(tmp_path / f"{name}.csv", np.zeros((3, 3)))
        manifest = {
            "n_rois": 3,
            "subjects": [
                {"file": "a.csv", "label": "x", "group": "s"},
                {"file": "b.csv", "label": "x", "group": "s"},
                {"file": "c.csv", "label": "y", "group": "s"},
                {"file": "d.csv", "label": "mystery", "group": "s"},
            ],
            "classes": ["x", "y"],
        }
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(manifest))
        with pytest.raises(ValueError, match="unknown label"):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        manifest = {
            "n_rois": 3,
            "subjects": [{"file": "nope.csv", "label": "x", "group": "s"}],
            "classes": ["x", "y"],
        }
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(manifest))
        with pytest.raises(FileNotFoundError):
            load_dataset(path)

    def test_groups_echo_manifest(self, tmp_path, rng):
        graphs = []
        for i in range(6):
            fc = compute_fc(rng.standard_normal((10, 4)))
            graphs.append(build_graph(fc, label=i % 2, group=f"site{i % 2}"))
        ds = Dataset(graphs=tuple(graphs), n_rois=4, class_names=("hc", "pt"))
        loaded = load_dataset(save_dataset(ds, tmp_path / "d"))
        assert sorted(set(loaded.groups)) == ["site0", "site1"]


class TestDatasetValidation:
    def test_requires_two_per_class(self, rng):
        fc = compute_fc(rng.standard_normal((10, 4)))
        graphs = [build_graph(fc, label=0) for _ in range(3)]
        graphs.append(build_graph(fc, label=1))
        with pytest.raises(ValueError, match="2 samples per class"):
            Dataset(graphs=tuple(graphs), n_rois=4, class_names=("a", "b"))

    def test_rejects_mixed_sizes(self, rng):
        g4 = build_graph(compute_fc(rng.standard_normal((10, 4))), label=0)
        g5 = build_graph(compute_fc(rng.standard_normal((10, 5))), label=1)
        with pytest.raises(ValueError, match="n_rois"):
            Dataset(graphs=(g4, g4, g5, g5), n_rois=4, class_names=("a", "b"))
