import json

import numpy as np
import pytest

from priopipe import pipeline as pl
from priopipe.dimred import ReducerConfig


def small_grid(seed=0, **overrides):
    grid = {
        "seed": seed,
        "umap": {"out_dims": 8, "n_neighbors": 10, "min_dist": 0.1, "epochs": 40},
        "estimators": [15],
        "hdbscan": {"min_cluster_size": 10, "min_samples": 5},
    }
    grid.update(overrides)
    return grid


@pytest.fixture(scope="module")
def small_inputs(synth_inputs):
    return synth_inputs


class TestEnumeration:
    def test_default_grid_yields_27_configs(self):
        configs = pl.enumerate_configs()
        assert len(configs) == 27
        kinds = [c.method.kind for c in configs]
        assert kinds.count("random") == 1
        assert kinds.count("clustering") == 21  # 3 algos x (4 reduced + 3 full)
        assert kinds.count("direct_centroid") == 1
        assert kinds.count("supervised") == 4

    def test_row_structure_matches_benchmark_tables(self):
        configs = pl.enumerate_configs()
        reduced_cluster = [
            c for c in configs
            if c.method.kind == "clustering" and c.dimred.kind == "umap"
        ]
        full_cluster = [
            c for c in configs
            if c.method.kind == "clustering" and c.dimred.kind == "none"
        ]
        assert len(reduced_cluster) == 12
        assert len(full_cluster) == 9
        assert all(c.method.mapping != "cosine_reduced" for c in full_cluster)
        supervised = [c for c in configs if c.method.kind == "supervised"]
        assert {(c.dimred.kind, c.method.algo) for c in supervised} == {
            ("umap", "boosting"),
            ("umap", "forest"),
            ("none", "boosting"),
            ("none", "forest"),
        }

    def test_estimator_sweep_arithmetic(self):
        grid = {"families": ["supervised"], "estimators": list(range(100, 501, 50))}
        configs = pl.enumerate_configs(grid)
        assert len(configs) == 2 * 2 * 9

    def test_invalid_combination_named(self):
        config = pl.PipelineConfig(
            ReducerConfig(kind="none"),
            pl.MethodConfig(kind="clustering", algo="kmeans", mapping="cosine_reduced"),
            seed=0,
        )
        with pytest.raises(pl.ConfigError, match="cosine_reduced_requires_dimred"):
            config.validate()

    def test_config_ids_stable_and_distinct(self):
        a = pl.enumerate_configs()
        b = pl.enumerate_configs()
        assert [c.id for c in a] == [c.id for c in b]
        assert len({c.id for c in a}) == 27

    def test_multiple_seeds_expand_the_grid(self):
        configs = pl.enumerate_configs({"seeds": [1, 2]})
        assert len(configs) == 54
        assert {c.seed for c in configs} == {1, 2}
        assert len({c.id for c in configs}) == 54


class TestRandomBaseline:
    def test_single_class_constant(self):
        preds = pl.random_baseline(np.array([4, 4, 4, 4]), seed=0)
        assert (preds == 4).all()

    def test_two_balanced_classes_accuracy(self):
        rng = np.random.default_rng(0)
        labels = rng.permutation(np.repeat([0, 1], 5000))
        preds = pl.random_baseline(labels, seed=3)
        acc = (preds == labels).mean()
        assert abs(acc - 0.5) <= 0.015

    def test_sixteen_uniform_classes(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 16, 40000)
        preds = pl.random_baseline(labels, seed=5)
        acc = (preds == labels).mean()
        # 3 sigma binomial tolerance around 1/16
        p = 1 / 16
        assert abs(acc - p) <= 3 * np.sqrt(p * (1 - p) / labels.size)


class TestRunConfig:
    def test_supervised_on_separable_fixture(self):
        from priopipe.dataset import DatasetSplit
        from priopipe.embedding import EmbeddingMatrix

        rng = np.random.default_rng(0)
        # four separable classes covering the whole 2x2 combined label space
        n = 160
        centers = np.array([[-4, -4], [-4, 4], [4, -4], [4, 4]], dtype=np.float64)
        data = np.vstack(
            [rng.normal(c, 0.4, (n // 4, 2)) for c in centers]
        ).astype(np.float32)
        labels = np.repeat([0, 1, 2, 3], n // 4)
        ids = tuple(f"r{i}" for i in range(n))
        order = rng.permutation(n)
        split = DatasetSplit(
            train=tuple(ids[i] for i in order[:100]),
            val=tuple(ids[i] for i in order[100:130]),
            test=tuple(ids[i] for i in order[130:]),
            seed=0,
        )
        inputs = pl.SweepInputs(EmbeddingMatrix(data, ids), labels, (2, 2), split)
        config = pl.PipelineConfig(
            ReducerConfig(kind="none"),
            pl.MethodConfig(kind="supervised", algo="forest", n_estimators=20),
            seed=1,
        )
        rows = pl.run_config(config, inputs, eval_splits=["train"])
        assert rows[0].combined_f1 >= 95.0

    def test_identical_config_and_seed_reproduces_rows(self, small_inputs):
        config = pl.PipelineConfig(
            ReducerConfig(kind="umap", out_dims=8, n_neighbors=10, epochs=30, seed=3),
            pl.MethodConfig(kind="clustering", algo="kmeans", mapping="majority"),
            seed=3,
        )
        a = pl.run_config(config, small_inputs)
        b = pl.run_config(config, small_inputs)
        skip = {"wall_time_s", "peak_memory_bytes"}
        for ra, rb in zip(a, b):
            da, db = ra.as_dict(), rb.as_dict()
            assert {k: v for k, v in da.items() if k not in skip} == {
                k: v for k, v in db.items() if k not in skip
            }

    def test_clustering_beyond_train_is_config_error(self, small_inputs):
        config = pl.PipelineConfig(
            ReducerConfig(kind="none"),
            pl.MethodConfig(kind="clustering", algo="kmeans", mapping="majority"),
            seed=0,
        )
        with pytest.raises(pl.ConfigError, match="clustering_eval_train_only"):
            pl.run_config(config, small_inputs, eval_splits=["train", "val"])

    def test_per_target_accuracy_dominates_combined(self, small_inputs):
        config = pl.PipelineConfig(
            ReducerConfig(kind="none"),
            pl.MethodConfig(kind="supervised", algo="forest", n_estimators=10),
            seed=2,
        )
        for row in pl.run_config(config, small_inputs):
            assert row.accuracy_urgency >= row.combined_acc - 1e-9
            assert row.accuracy_impact >= row.combined_acc - 1e-9

    def test_train_only_fitting(self, small_inputs):
        # removing val/test rows must not change train predictions
        config = pl.PipelineConfig(
            ReducerConfig(kind="umap", out_dims=8, n_neighbors=10, epochs=30, seed=1),
            pl.MethodConfig(kind="supervised", algo="boosting", n_estimators=5),
            seed=1,
        )
        full_rows = pl.run_config(config, small_inputs, eval_splits=["train"])

        from priopipe.dataset import DatasetSplit
        from priopipe.embedding import EmbeddingMatrix

        keep_ids = list(small_inputs.split.train)
        sub_matrix = small_inputs.embeddings.subset(keep_ids)
        keep_rows = small_inputs.rows_for("train")
        # degenerate split: all rows are train; val/test empty
        sub_split = DatasetSplit(tuple(keep_ids), (), (), seed=0)
        sub_inputs = pl.SweepInputs(
            sub_matrix,
            small_inputs.labels[keep_rows],
            small_inputs.cardinalities,
            sub_split,
        )
        sub_rows = pl.run_config(config, sub_inputs, eval_splits=["train"])
        assert full_rows[0].combined_acc == sub_rows[0].combined_acc
        assert full_rows[0].combined_f1 == sub_rows[0].combined_f1


@pytest.fixture(scope="module")
def sweep_rows(small_inputs, tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    configs = pl.enumerate_configs(small_grid(seed=5))
    rows = pl.run_sweep(configs, small_inputs, out_dir=out, threads=2)
    return configs, rows, out


class TestSweep:
    def test_row_count_and_success(self, sweep_rows):
        configs, rows, _ = sweep_rows
        assert len(configs) == 27
        # supervised configs add a val row each
        assert len(rows) == 27 + 4
        assert all(r.status == "ok" for r in rows)

    def test_results_files_written(self, sweep_rows):
        _, rows, out = sweep_rows
        csv_text = (out / "results.csv").read_text()
        header = csv_text.splitlines()[0].split(",")
        assert header == list(pl.CSV_COLUMNS)
        assert len(csv_text.splitlines()) == len(rows) + 1
        assert (out / "results.md").exists()

    def test_run_directories_written(self, sweep_rows):
        configs, _, out = sweep_rows
        for config in configs:
            run_dir = out / "runs" / config.id
            assert (run_dir / "config.json").exists()
            assert (run_dir / "result.json").exists()
            loaded = json.loads((run_dir / "config.json").read_text())
            assert loaded == config.as_dict()

    def test_thread_count_does_not_change_metrics(self, small_inputs):
        configs = pl.enumerate_configs(small_grid(seed=2))[:8]
        rows1 = pl.run_sweep(configs, small_inputs, threads=1)
        rows4 = pl.run_sweep(configs, small_inputs, threads=4)
        skip = {"wall_time_s", "peak_memory_bytes"}
        for a, b in zip(rows1, rows4):
            da = {k: v for k, v in a.as_dict().items() if k not in skip}
            db = {k: v for k, v in b.as_dict().items() if k not in skip}
            assert da == db

    def test_failed_stage_keeps_sweep_alive(self, small_inputs):
        bad = pl.PipelineConfig(
            ReducerConfig(kind="umap", out_dims=8, n_neighbors=2000, epochs=10),
            pl.MethodConfig(kind="clustering", algo="kmeans", mapping="majority"),
            seed=0,
        )
        good = pl.PipelineConfig(
            ReducerConfig(kind="none"), pl.MethodConfig(kind="random"), seed=0
        )
        rows = pl.run_sweep([bad, good], small_inputs)
        assert rows[0].status == "FAILED:dimred"
        assert rows[1].status == "ok"

    def test_config_order_does_not_change_results(self, small_inputs):
        configs = pl.enumerate_configs(small_grid(seed=4))[:6]
        forward = pl.run_sweep(configs, small_inputs)
        backward = pl.run_sweep(list(reversed(configs)), small_inputs)
        skip = {"wall_time_s", "peak_memory_bytes"}

        def key(rows):
            return {
                (r.config_id, r.split): {
                    k: v for k, v in r.as_dict().items() if k not in skip
                }
                for r in rows
            }

        assert key(forward) == key(backward)

    def test_reducer_persisted_in_run_dir(self, small_inputs, tmp_path):
        config = pl.PipelineConfig(
            ReducerConfig(kind="umap", out_dims=8, n_neighbors=10, epochs=20, seed=1),
            pl.MethodConfig(kind="supervised", algo="forest", n_estimators=5),
            seed=1,
        )
        pl.run_config(config, small_inputs, eval_splits=["train"], out_dir=tmp_path)
        reducer_dir = tmp_path / "runs" / config.id / "reducer"
        meta = json.loads((reducer_dir / "meta.json").read_text())
        assert meta["kind"] == "umap"
        assert meta["out_dims"] == 8
        from priopipe.embedding import load_embeddings

        train_emb = load_embeddings(reducer_dir / "train_embedding.embv1")
        assert train_emb.rows == len(small_inputs.split.train)
        assert train_emb.dims == 8

    def test_time_feature_column_appended_on_request(self, synth_clean):
        from priopipe import dataset as ds
        from priopipe.embedding import pseudo_embed_matrix

        records = synth_clean[:200]
        texts = [ds.compose_text(r) for r in records]
        matrix = pseudo_embed_matrix(texts, [r.id for r in records], 32, seed=1)
        plain = pl.SweepInputs.from_records(records, matrix, (5, 4), seed=2)
        timed = pl.SweepInputs.from_records(
            records, matrix, (5, 4), seed=2, append_time_feature=True
        )
        assert plain.embeddings.dims == 32
        assert timed.embeddings.dims == 33
        col = timed.embeddings.data[:, -1]
        assert col.min() >= 0.0 and col.max() <= 1.0
        # scaler is train-fitted: train rows span the unit interval
        train_col = col[timed.rows_for("train")]
        assert train_col.min() == 0.0 and train_col.max() == 1.0

    def test_failed_row_cells_carry_stage(self, small_inputs, tmp_path):
        bad = pl.PipelineConfig(
            ReducerConfig(kind="umap", out_dims=8, n_neighbors=2000, epochs=10),
            pl.MethodConfig(kind="clustering", algo="kmeans", mapping="majority"),
            seed=0,
        )
        rows = pl.run_sweep([bad], small_inputs, out_dir=tmp_path)
        text = (tmp_path / "results.csv").read_text()
        assert "FAILED:dimred" in text


class TestReports:
    def test_single_row_csv(self, tmp_path):
        row = pl.ResultRow(
            config_id="abc", dim_reduction="none", method="random",
            assignment="random", estimators="", split="train",
            combined_acc=7.2, combined_f1=3.4, accuracy_urgency=26.1,
            f1_urgency=23.1, accuracy_impact=28.6, f1_impact=13.8,
        )
        path = tmp_path / "r.csv"
        pl.emit_report([row], "csv", path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(pl.CSV_COLUMNS)

    def test_deterministic_bytes(self, tmp_path):
        rows = [
            pl.ResultRow(
                config_id=f"c{i}", dim_reduction="none", method="kmeans",
                assignment="majority", estimators="", split="train",
                combined_acc=float(i),
            )
            for i in range(4)
        ]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        pl.emit_report(rows, "csv", p1)
        pl.emit_report(rows, "csv", p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_markdown_shape(self, tmp_path):
        row = pl.ResultRow(
            config_id="abc", dim_reduction="umap", method="kmeans",
            assignment="majority", estimators="", split="train",
        )
        path = tmp_path / "r.md"
        pl.emit_report([row], "markdown", path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("| config_id |")
        assert set(lines[1].replace("|", "")) <= {"-"}

    def test_select_best_maximizes_mean_target_f1(self, tmp_path):
        rows = [
            pl.ResultRow(
                config_id=f"c{i}", dim_reduction="none", method="boosting",
                assignment="", estimators=str(100 + 50 * i), split="val",
                f1_urgency=50.0 + i, f1_impact=40.0 - 2 * i,
                combined_acc=1.0, combined_f1=1.0,
                accuracy_urgency=1.0, accuracy_impact=1.0,
            )
            for i in range(5)
        ]
        path = tmp_path / "results.csv"
        pl.emit_report(rows, "csv", path)
        best = pl.select_best(pl.read_results_csv(path))
        # (50+i + 40-2i)/2 decreases with i -> best is i=0
        assert best["config_id"] == "c0"
