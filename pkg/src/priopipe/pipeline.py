"""Enumerate and execute pipeline combinations; produce result tables.

A pipeline is one point in the combination space: optional dimensionality
reduction crossed with one method family (clustering + cluster-label
mapping, direct centroid classification, supervised ensemble, or the random
baseline). Everything is fitted on the train split only; evaluation splits
are decomposed back into per-target urgency/impact metrics.
"""

from __future__ import annotations

import hashlib
import json
import resource
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from priopipe import clustering as clst
from priopipe import mapping as mapg
from priopipe import metrics as mets
from priopipe import supervised as supv
from priopipe.dataset import DatasetSplit, decompose_combined, stratified_split
from priopipe.dimred import ReducerConfig, fit_transform as reducer_fit_transform
from priopipe.embedding import EmbeddingMatrix, class_centroids

__all__ = [
    "ConfigError",
    "StageError",
    "MethodConfig",
    "PipelineConfig",
    "SweepInputs",
    "ResultRow",
    "CSV_COLUMNS",
    "default_grid",
    "enumerate_configs",
    "random_baseline",
    "run_config",
    "run_sweep",
    "emit_report",
    "read_results_csv",
    "select_best",
]

CLUSTER_ALGOS = ("hdbscan", "agglomerative", "kmeans")
SUPERVISED_ALGOS = ("boosting", "forest")


class ConfigError(ValueError):
    """Invalid pipeline combination; message names the violated rule."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class MethodConfig:
    kind: str  # clustering | direct_centroid | supervised | random
    algo: str | None = None
    mapping: str | None = None
    space: str | None = None  # direct_centroid: full | reduced
    n_estimators: int | None = None
    k: int | None = None  # cluster count override (kmeans/agglomerative)
    linkage: str = "ward"
    min_cluster_size: int = 15
    min_samples: int = 5

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "algo": self.algo,
            "mapping": self.mapping,
            "space": self.space,
            "n_estimators": self.n_estimators,
            "k": self.k,
            "linkage": self.linkage,
            "min_cluster_size": self.min_cluster_size,
            "min_samples": self.min_samples,
        }


@dataclass(frozen=True)
class PipelineConfig:
    dimred: ReducerConfig
    method: MethodConfig
    seed: int

    def as_dict(self) -> dict:
        return {
            "dimred": self.dimred.as_dict(),
            "method": self.method.as_dict(),
            "seed": self.seed,
        }

    @property
    def id(self) -> str:
        canon = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    def validate(self) -> None:
        m = self.method
        if m.kind == "clustering":
            if m.algo not in CLUSTER_ALGOS:
                raise ConfigError(f"unknown_clustering:{m.algo}")
            if m.mapping not in mapg.STRATEGIES:
                raise ConfigError(f"unknown_mapping:{m.mapping}")
            if m.mapping == "cosine_reduced" and self.dimred.kind == "none":
                raise ConfigError("cosine_reduced_requires_dimred")
        elif m.kind == "direct_centroid":
            if m.space not in ("full", "reduced"):
                raise ConfigError(f"unknown_space:{m.space}")
            if m.space == "reduced" and self.dimred.kind == "none":
                raise ConfigError("direct_reduced_requires_dimred")
        elif m.kind == "supervised":
            if m.algo not in SUPERVISED_ALGOS:
                raise ConfigError(f"unknown_model:{m.algo}")
            if not m.n_estimators or m.n_estimators < 1:
                raise ConfigError("estimators_must_be_positive")
        elif m.kind != "random":
            raise ConfigError(f"unknown_kind:{m.kind}")

    def describe(self) -> tuple[str, str, str, str]:
        """(dim_reduction, method, assignment, estimators) column values."""
        dr = self.dimred.kind
        m = self.method
        if m.kind == "clustering":
            return dr, m.algo or "", m.mapping or "", ""
        if m.kind == "direct_centroid":
            return dr, "direct_centroid", f"{m.space}_space", ""
        if m.kind == "supervised":
            return dr, m.algo or "", "", str(m.n_estimators)
        return "none", "none", "random", ""


@dataclass
class SweepInputs:
    """Aligned bundle: embeddings (manifest = ticket ids), combined labels
    per row, label cardinalities, and the train/val/test split."""

    embeddings: EmbeddingMatrix
    labels: np.ndarray
    cardinalities: tuple[int, int]
    split: DatasetSplit

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape[0] != self.embeddings.rows:
            raise ValueError("labels not aligned with embedding rows")
        self._row_of = {rid: i for i, rid in enumerate(self.embeddings.ids)}
        for name in ("train", "val", "test"):
            for rid in getattr(self.split, name):
                if rid not in self._row_of:
                    raise ValueError(f"split id {rid!r} missing from manifest")

    def rows_for(self, split_name: str) -> np.ndarray:
        ids = getattr(self.split, split_name)
        return np.asarray([self._row_of[rid] for rid in ids], dtype=np.int64)

    @classmethod
    def from_records(
        cls,
        records,
        matrix: EmbeddingMatrix,
        cardinalities,
        ratios=(0.6, 0.2, 0.2),
        seed: int = 0,
        append_time_feature: bool = False,
    ):
        """Build inputs from cleaned tickets and their embedding matrix.

        With append_time_feature the resolution-window duration (hours,
        min-max scaled on the train split, clamped elsewhere) is appended
        as one extra embedding column. Off by default: embedding pipelines
        consume text signal only.
        """
        from priopipe.dataset import combined_label, time_feature
        from priopipe.embedding import fit_minmax

        by_id = {rec.id: rec for rec in records}
        if set(by_id) != set(matrix.ids):
            raise ValueError("embedding manifest does not match ticket ids")
        max_u, max_i = cardinalities
        labels = np.asarray(
            [
                combined_label(by_id[rid].urgency, by_id[rid].impact, (max_u, max_i))
                for rid in matrix.ids
            ],
            dtype=np.int64,
        )
        split = stratified_split(records, ratios=ratios, seed=seed)
        if append_time_feature:
            hours = {rid: time_feature(by_id[rid]) for rid in matrix.ids}
            scaler = fit_minmax([hours[rid] for rid in split.train])
            column = scaler.transform_many(
                [hours[rid] for rid in matrix.ids]
            ).astype(np.float32)
            matrix = EmbeddingMatrix(
                np.hstack([matrix.data, column[:, None]]), matrix.ids
            )
        return cls(matrix, labels, (max_u, max_i), split)


_METRIC_FIELDS = (
    "combined_acc",
    "combined_f1",
    "accuracy_urgency",
    "f1_urgency",
    "accuracy_impact",
    "f1_impact",
    "kappa_urgency_linear",
    "kappa_urgency_quadratic",
    "kappa_impact_linear",
    "kappa_impact_quadratic",
)

CSV_COLUMNS = (
    "config_id",
    "dim_reduction",
    "method",
    "assignment",
    "estimators",
    "split",
    "status",
    *_METRIC_FIELDS,
    "wall_time_s",
    "peak_memory_bytes",
)


@dataclass
class ResultRow:
    config_id: str
    dim_reduction: str
    method: str
    assignment: str
    estimators: str
    split: str
    status: str = "ok"  # ok | FAILED:<stage>
    combined_acc: float | None = None
    combined_f1: float | None = None
    accuracy_urgency: float | None = None
    f1_urgency: float | None = None
    accuracy_impact: float | None = None
    f1_impact: float | None = None
    kappa_urgency_linear: float | None = None
    kappa_urgency_quadratic: float | None = None
    kappa_impact_linear: float | None = None
    kappa_impact_quadratic: float | None = None
    wall_time_s: float = 0.0
    peak_memory_bytes: int = 0

    def cell(self, column: str) -> str:
        value = getattr(self, column)
        if column in _METRIC_FIELDS and self.status != "ok":
            return self.status
        if value is None:
            return ""
        if isinstance(value, float):
            return f"{value:.6g}"
        return str(value)

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


def default_grid(seed: int = 0) -> dict:
    """The benchmarked combination space: 27 configurations."""
    return {
        "seed": seed,
        "families": ["random", "clustering", "direct_centroid", "supervised"],
        "umap": {"out_dims": 16, "n_neighbors": 15, "min_dist": 0.1, "epochs": 200},
        "clusterings": list(CLUSTER_ALGOS),
        "mappings": ["majority", "hungarian", "cosine_full"],
        "estimators": [100],
        "linkage": "ward",
        "hdbscan": {"min_cluster_size": 15, "min_samples": 5},
        "kmeans_k": None,
        "eval_splits": {
            "random": ["train"],
            "clustering": ["train"],
            "direct_centroid": ["train"],
            "supervised": ["train", "val"],
        },
    }


def _reducer_from_grid(grid: dict, kind: str, seed: int) -> ReducerConfig:
    if kind == "none":
        return ReducerConfig(kind="none", seed=seed)
    params = grid.get("umap", {})
    return ReducerConfig(
        kind="umap",
        out_dims=int(params.get("out_dims", 16)),
        n_neighbors=int(params.get("n_neighbors", 15)),
        min_dist=float(params.get("min_dist", 0.1)),
        epochs=int(params.get("epochs", 200)),
        seed=seed,
    )


def enumerate_configs(grid: dict | None = None) -> list[PipelineConfig]:
    """Expand the grid into the ordered list of pipeline configurations.

    The default grid reproduces the benchmark table structure: random
    baseline, reduced-space clustering with four mappings, direct centroid
    classification in reduced space, full-space clustering with three
    mappings, then the supervised families. Invalid combinations raise
    ConfigError naming the rule.
    """
    grid = {**default_grid(), **(grid or {})}
    seeds = grid.get("seeds")
    if seeds is not None:
        configs: list[PipelineConfig] = []
        for seed in seeds:
            configs.extend(enumerate_configs({**grid, "seeds": None, "seed": int(seed)}))
        return configs
    seed = int(grid.get("seed", 0))
    families = grid["families"]
    hdb = grid.get("hdbscan", {})
    common = {
        "k": grid.get("kmeans_k"),
        "linkage": grid.get("linkage", "ward"),
        "min_cluster_size": int(hdb.get("min_cluster_size", 15)),
        "min_samples": int(hdb.get("min_samples", 5)),
    }
    umap_cfg = _reducer_from_grid(grid, "umap", seed)
    none_cfg = _reducer_from_grid(grid, "none", seed)

    configs: list[PipelineConfig] = []
    if "random" in families:
        configs.append(
            PipelineConfig(none_cfg, MethodConfig(kind="random"), seed)
        )
    if "clustering" in families:
        for algo in grid["clusterings"]:
            for mapping in [*grid["mappings"], "cosine_reduced"]:
                configs.append(
                    PipelineConfig(
                        umap_cfg,
                        MethodConfig(
                            kind="clustering", algo=algo, mapping=mapping, **common
                        ),
                        seed,
                    )
                )
    if "direct_centroid" in families:
        configs.append(
            PipelineConfig(
                umap_cfg, MethodConfig(kind="direct_centroid", space="reduced"), seed
            )
        )
    if "clustering" in families:
        for algo in grid["clusterings"]:
            for mapping in grid["mappings"]:
                configs.append(
                    PipelineConfig(
                        none_cfg,
                        MethodConfig(
                            kind="clustering", algo=algo, mapping=mapping, **common
                        ),
                        seed,
                    )
                )
    if "supervised" in families:
        for dimred in (umap_cfg, none_cfg):
            for algo in SUPERVISED_ALGOS:
                for n_est in grid["estimators"]:
                    configs.append(
                        PipelineConfig(
                            dimred,
                            MethodConfig(
                                kind="supervised", algo=algo, n_estimators=int(n_est)
                            ),
                            seed,
                        )
                    )
    for config in configs:
        config.validate()
    return configs


def random_baseline(labels: np.ndarray, seed: int, size: int | None = None) -> np.ndarray:
    """Uniform draw over the observed classes, seeded."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("no observed classes")
    observed = np.unique(labels)
    rng = np.random.default_rng(seed)
    return observed[rng.integers(0, observed.size, size or labels.size)]


def _metrics_for(row: ResultRow, true_combined, pred_combined, cards) -> None:
    max_u, max_i = cards
    k = max_u * max_i
    cm = mets.confusion(true_combined, pred_combined, k)
    row.combined_acc = 100.0 * mets.accuracy(cm)
    row.combined_f1 = 100.0 * mets.macro_f1(cm)
    true_u, true_i = np.divmod(np.asarray(true_combined), max_i)
    pred_u, pred_i = np.divmod(np.asarray(pred_combined), max_i)
    cm_u = mets.confusion(true_u, pred_u, max_u)
    cm_i = mets.confusion(true_i, pred_i, max_i)
    row.accuracy_urgency = 100.0 * mets.accuracy(cm_u)
    row.f1_urgency = 100.0 * mets.macro_f1(cm_u)
    row.accuracy_impact = 100.0 * mets.accuracy(cm_i)
    row.f1_impact = 100.0 * mets.macro_f1(cm_i)
    for attr, cm_t, weighting in (
        ("kappa_urgency_linear", cm_u, "linear"),
        ("kappa_urgency_quadratic", cm_u, "quadratic"),
        ("kappa_impact_linear", cm_i, "linear"),
        ("kappa_impact_quadratic", cm_i, "quadratic"),
    ):
        try:
            setattr(row, attr, mets.cohen_kappa(cm_t, weighting))
        except ValueError:
            setattr(row, attr, None)


class _ReducerCache:
    """Compute-once cache for fitted reducers, shared across worker threads.

    Keyed by reducer config + input identity: configs differing only in the
    method stage reuse the same fitted reduction.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[str, tuple] = {}

    def fit(self, config: ReducerConfig, inputs: "SweepInputs"):
        # the entry pins `inputs` so its id cannot be recycled while cached
        key = json.dumps(config.as_dict(), sort_keys=True) + f"|{id(inputs)}"
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                entry = (threading.Event(), [None, None], inputs)
                self._entries[key] = entry
                owner = True
            else:
                owner = False
        event, slot, _ = entry
        if owner:
            try:
                rows_train = inputs.rows_for("train")
                train_matrix = EmbeddingMatrix(
                    inputs.embeddings.data[rows_train],
                    tuple(inputs.embeddings.ids[i] for i in rows_train),
                )
                slot[0] = reducer_fit_transform(config, train_matrix)
            except Exception as exc:  # propagate to all waiters
                slot[1] = exc
            finally:
                event.set()
        else:
            event.wait()
        if slot[1] is not None:
            raise slot[1]
        return slot[0]


def run_config(
    config: PipelineConfig,
    inputs: SweepInputs,
    eval_splits: list[str] | None = None,
    out_dir: str | Path | None = None,
    reducer_cache: _ReducerCache | None = None,
) -> list[ResultRow]:
    """Fit the pipeline on train, evaluate the requested splits.

    Returns one ResultRow per split. All fitting (reducer, clusterer, label
    maps, models) sees train rows only. A stage failure surfaces as
    StageError naming the stage.
    """
    config.validate()
    if eval_splits is None:
        eval_splits = (
            ["train", "val"] if config.method.kind == "supervised" else ["train"]
        )
    if config.method.kind == "clustering" and any(s != "train" for s in eval_splits):
        raise ConfigError("clustering_eval_train_only")

    dim_reduction, method_name, assignment, estimators = config.describe()
    t0 = time.perf_counter()
    rows_train = inputs.rows_for("train")
    train_labels = inputs.labels[rows_train]
    full = inputs.embeddings.data.astype(np.float64)

    try:
        reduced_matrix = None
        reducer = None
        if config.dimred.kind != "none":
            cache = reducer_cache or _ReducerCache()
            reduced_matrix, reducer = cache.fit(config.dimred, inputs)
    except ConfigError:
        raise
    except Exception as exc:
        raise StageError("dimred", exc)

    def train_features() -> np.ndarray:
        if reduced_matrix is None:
            return full[rows_train]
        return reduced_matrix.data.astype(np.float64)

    def split_features(split_name: str) -> np.ndarray:
        rows = inputs.rows_for(split_name)
        if reduced_matrix is None:
            return full[rows]
        if split_name == "train":
            return reduced_matrix.data.astype(np.float64)
        return reducer.transform(full[rows])

    artifacts: dict[str, dict] = {}
    predict = None  # split_name -> predictions
    method = config.method
    try:
        if method.kind == "random":
            def predict(split_name: str) -> np.ndarray:
                rows = inputs.rows_for(split_name)
                sidx = ("train", "val", "test").index(split_name)
                rng_seed = np.random.SeedSequence(
                    entropy=config.seed, spawn_key=(sidx,)
                )
                observed = np.unique(train_labels)
                rng = np.random.default_rng(rng_seed)
                return observed[rng.integers(0, observed.size, rows.size)]

        elif method.kind == "clustering":
            feats = train_features()
            if method.algo == "kmeans":
                k = method.k or int(np.unique(train_labels).size)
                result = clst.kmeans(feats, k, seed=config.seed)
            elif method.algo == "agglomerative":
                k = method.k or int(np.unique(train_labels).size)
                result = clst.agglomerative(feats, k, linkage=method.linkage)
            else:
                result = clst.hdbscan(
                    feats,
                    min_cluster_size=method.min_cluster_size,
                    min_samples=method.min_samples,
                )
            if method.mapping == "majority":
                label_map = mapg.majority_map(result, train_labels)
            elif method.mapping == "hungarian":
                label_map = mapg.hungarian_map(result, train_labels)
            else:
                # cosine_full scores against full-space centroids even when
                # the clusters were found in the reduced space
                space = "reduced" if method.mapping == "cosine_reduced" else "full"
                data = train_features() if space == "reduced" else full[rows_train]
                cents = class_centroids(data, train_labels)
                label_map = mapg.cosine_centroid_map(
                    result, data, cents, train_labels, space=space
                )
            preds_train = mapg.apply_map(result, label_map)
            artifacts["clusters"] = result.as_dict()
            artifacts["label_map"] = label_map.as_dict()

            def predict(split_name: str) -> np.ndarray:
                assert split_name == "train"
                return preds_train

        elif method.kind == "direct_centroid":
            space_data = (
                train_features() if method.space == "reduced" else full[rows_train]
            )
            cents = class_centroids(space_data, train_labels)

            def predict(split_name: str) -> np.ndarray:
                if method.space == "reduced":
                    feats = split_features(split_name)
                else:
                    feats = full[inputs.rows_for(split_name)]
                return mapg.direct_centroid_classify(feats, cents)

        else:  # supervised
            n_classes = inputs.cardinalities[0] * inputs.cardinalities[1]
            feats = train_features()
            if method.algo == "forest":
                model = supv.RandomForestModel(
                    n_estimators=method.n_estimators, seed=config.seed
                ).fit(feats, train_labels, n_classes)
            else:
                model = supv.GradientBoostingModel(
                    n_estimators=method.n_estimators, seed=config.seed
                ).fit(feats, train_labels, n_classes)
            artifacts["model"] = model.as_dict()

            def predict(split_name: str) -> np.ndarray:
                return model.predict(split_features(split_name))

    except (ConfigError, StageError):
        raise
    except Exception as exc:
        raise StageError(method.kind, exc)

    out_rows = []
    for split_name in eval_splits:
        try:
            preds = predict(split_name)
        except Exception as exc:
            raise StageError(f"predict:{split_name}", exc)
        rows = inputs.rows_for(split_name)
        row = ResultRow(
            config_id=config.id,
            dim_reduction=dim_reduction,
            method=method_name,
            assignment=assignment,
            estimators=estimators,
            split=split_name,
        )
        try:
            _metrics_for(row, inputs.labels[rows], preds, inputs.cardinalities)
        except Exception as exc:
            raise StageError(f"metrics:{split_name}", exc)
        row.wall_time_s = time.perf_counter() - t0
        row.peak_memory_bytes = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
        out_rows.append(row)
        artifacts.setdefault("predictions", {})[split_name] = [int(p) for p in preds]

    if out_dir is not None:
        run_dir = Path(out_dir) / "runs" / config.id
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.json").write_text(json.dumps(config.as_dict(), indent=2))
        (run_dir / "result.json").write_text(
            json.dumps([r.as_dict() for r in out_rows], indent=2)
        )
        for name, payload in artifacts.items():
            (run_dir / f"{name}.json").write_text(json.dumps(payload))
        if reducer is not None:
            from priopipe.dimred import save_reducer

            save_reducer(reducer, run_dir / "reducer")
    return out_rows


def run_sweep(
    configs: list[PipelineConfig],
    inputs: SweepInputs,
    out_dir: str | Path | None = None,
    threads: int = 1,
    eval_splits_map: dict[str, list[str]] | None = None,
) -> list[ResultRow]:
    """Execute every configuration; a failed stage yields a FAILED row and
    the sweep continues. Output order follows the config list regardless of
    scheduling."""
    cache = _ReducerCache()
    eval_splits_map = eval_splits_map or default_grid()["eval_splits"]

    def work(config: PipelineConfig) -> list[ResultRow]:
        splits = eval_splits_map.get(config.method.kind)
        try:
            return run_config(
                config, inputs, eval_splits=splits, out_dir=out_dir, reducer_cache=cache
            )
        except (StageError, ConfigError) as exc:
            stage = exc.stage if isinstance(exc, StageError) else "config"
            dim_reduction, method_name, assignment, estimators = config.describe()
            return [
                ResultRow(
                    config_id=config.id,
                    dim_reduction=dim_reduction,
                    method=method_name,
                    assignment=assignment,
                    estimators=estimators,
                    split=(splits or ["train"])[0],
                    status=f"FAILED:{stage}",
                )
            ]

    if threads <= 1:
        results = [work(c) for c in configs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, configs))
    rows = [row for batch in results for row in batch]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_report(rows, "csv", out / "results.csv")
        emit_report(rows, "markdown", out / "results.md")
    return rows


def emit_report(rows: list[ResultRow], fmt: str, path: str | Path) -> None:
    """Write rows as CSV or a markdown table with the stable column order."""
    if not rows:
        raise ValueError("no rows to report")
    lines = []
    if fmt == "csv":
        lines.append(",".join(CSV_COLUMNS))
        for row in rows:
            lines.append(",".join(row.cell(c) for c in CSV_COLUMNS))
    elif fmt == "markdown":
        lines.append("| " + " | ".join(CSV_COLUMNS) + " |")
        lines.append("|" + "|".join(["---"] * len(CSV_COLUMNS)) + "|")
        for row in rows:
            lines.append("| " + " | ".join(row.cell(c) for c in CSV_COLUMNS) + " |")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_results_csv(path: str | Path) -> list[dict]:
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def select_best(rows: list[dict], split: str = "val") -> dict:
    """Row maximizing the mean of urgency and impact F1 on the given split."""
    best = None
    best_score = -np.inf
    for row in rows:
        if row.get("split") != split or row.get("status") != "ok":
            continue
        try:
            score = (float(row["f1_urgency"]) + float(row["f1_impact"])) / 2.0
        except (KeyError, ValueError):
            continue
        if score > best_score:
            best_score = score
            best = row
    if best is None:
        raise ValueError(f"no scorable rows for split {split!r}")
    return best
