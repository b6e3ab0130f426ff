"""Dimensionality reduction: pass-through, exact PCA, and a UMAP-style
nonlinear reducer (exact k-NN graph, fuzzy membership weights, negative-
sampling SGD layout).

The PCA path is deterministic and exact; it exists so downstream stages can
be tested against a reducer with no stochastic layer. The nonlinear path is
deterministic given its seed (sequential layout).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from priopipe import _kernels
from priopipe.embedding import EmbeddingMatrix

__all__ = [
    "ReducerConfig",
    "IdentityReducer",
    "PCAReducer",
    "UmapReducer",
    "make_reducer",
    "fit_transform",
    "find_curve_params",
    "save_reducer",
]

_SMOOTH_TOL = 1e-5
_MIN_SIGMA_SCALE = 1e-3


@dataclass(frozen=True)
class ReducerConfig:
    kind: str = "none"  # none | pca | umap
    out_dims: int = 16
    n_neighbors: int = 15
    min_dist: float = 0.1
    epochs: int = 200
    seed: int = 0

    def validate(self, in_dims: int | None = None) -> None:
        if self.kind not in ("none", "pca", "umap"):
            raise ValueError(f"unknown reducer kind {self.kind!r}")
        if self.kind != "none":
            if self.out_dims < 1:
                raise ValueError("out_dims must be >= 1")
            if in_dims is not None and self.out_dims >= in_dims:
                raise ValueError(
                    f"out_dims {self.out_dims} must be < input dims {in_dims}"
                )
        if self.kind == "umap" and self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "out_dims": self.out_dims,
            "n_neighbors": self.n_neighbors,
            "min_dist": self.min_dist,
            "epochs": self.epochs,
            "seed": self.seed,
        }


def _check_finite(X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if not np.isfinite(X).all():
        raise ValueError("non-finite values in reducer input")
    return X


class IdentityReducer:
    kind = "none"

    def fit(self, X: np.ndarray) -> "IdentityReducer":
        self.in_dims_ = _check_finite(X).shape[1]
        return self

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        self.fit(X)
        return np.asarray(X, dtype=np.float64)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = _check_finite(X)
        if X.shape[1] != self.in_dims_:
            raise ValueError(f"expected {self.in_dims_} dims, got {X.shape[1]}")
        return X


class PCAReducer:
    """Exact principal-component projection via SVD.

    Component signs are fixed (largest-magnitude loading positive) so output
    is deterministic. Output coordinate variance is non-increasing by
    component.
    """

    kind = "pca"

    def __init__(self, out_dims: int):
        self.out_dims = out_dims

    def fit(self, X: np.ndarray) -> "PCAReducer":
        X = _check_finite(X)
        if self.out_dims >= X.shape[1]:
            raise ValueError("out_dims must be < input dims")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        components = np.zeros((self.out_dims, X.shape[1]), dtype=np.float64)
        available = min(self.out_dims, vt.shape[0])
        components[:available] = vt[:available]
        for row in components[:available]:
            pivot = np.argmax(np.abs(row))
            if row[pivot] < 0:
                row *= -1.0
        self.components_ = components
        self.singular_values_ = s[:available]
        return self

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        return self.fit(X).transform(X)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = _check_finite(X)
        if X.shape[1] != self.components_.shape[1]:
            raise ValueError(
                f"expected {self.components_.shape[1]} dims, got {X.shape[1]}"
            )
        return (X - self.mean_) @ self.components_.T


def find_curve_params(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Fit (a, b) of the low-dimensional kernel 1/(1 + a*d^(2b)).

    Least-squares match (damped Gauss-Newton) against the target curve that
    is 1 below min_dist and exp(-(d - min_dist)/spread) beyond it.
    """
    xs = np.linspace(0.0, spread * 3.0, 300)
    ys = np.where(xs < min_dist, 1.0, np.exp(-(xs - min_dist) / spread))
    positive = xs > 0

    def residual(a: float, b: float) -> np.ndarray:
        t = np.zeros_like(xs)
        t[positive] = xs[positive] ** (2.0 * b)
        return 1.0 / (1.0 + a * t) - ys

    a, b = 1.0, 1.0
    lam = 1e-3
    sse = float((residual(a, b) ** 2).sum())
    for _ in range(200):
        t = np.zeros_like(xs)
        t[positive] = xs[positive] ** (2.0 * b)
        denom = (1.0 + a * t) ** 2
        grad_a = np.where(positive, -t / denom, 0.0)
        grad_b = np.zeros_like(xs)
        grad_b[positive] = (
            -2.0 * a * t[positive] * np.log(xs[positive]) / denom[positive]
        )
        jac = np.stack([grad_a, grad_b], axis=1)
        res = residual(a, b)
        lhs = jac.T @ jac + lam * np.eye(2)
        rhs = -jac.T @ res
        try:
            step = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError:
            break
        new_a, new_b = a + step[0], b + step[1]
        if new_a <= 0 or new_b <= 0:
            lam *= 10.0
            continue
        new_sse = float((residual(new_a, new_b) ** 2).sum())
        if new_sse < sse:
            improved = sse - new_sse
            a, b, sse = new_a, new_b, new_sse
            lam = max(lam / 3.0, 1e-12)
            if improved < 1e-14:
                break
        else:
            lam *= 10.0
    return float(a), float(b)


def _pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = (
        (A * A).sum(axis=1)[:, None]
        + (B * B).sum(axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    return np.maximum(sq, 0.0)


def _knn(A: np.ndarray, B: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k nearest rows of B for each row of A (Euclidean, exact, ascending)."""
    d = np.sqrt(_pairwise_sq_dists(A, B))
    idx = np.argsort(d, axis=1, kind="stable")[:, :k]
    return idx, np.take_along_axis(d, idx, axis=1)


def _smooth_knn(knn_dists: np.ndarray, k: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-point bandwidths: rho = nearest nonzero distance, sigma solved by
    binary search so the fuzzy neighborhood has cardinality log2(k)."""
    n = knn_dists.shape[0]
    target = np.log2(k)
    nonzero = knn_dists > 0.0
    # rho: first nonzero neighbor distance (0 when all distances are 0)
    rho = np.where(
        nonzero.any(axis=1),
        np.where(nonzero, knn_dists, np.inf).min(axis=1),
        0.0,
    )
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    mid = np.ones(n)
    done = np.zeros(n, dtype=bool)
    tail = knn_dists[:, 1:]  # first column is the self distance
    for _ in range(64):
        gap = tail - rho[:, None]
        psum = np.where(gap > 0, np.exp(-gap / mid[:, None]), 1.0).sum(axis=1)
        done |= np.abs(psum - target) < _SMOOTH_TOL
        high = (psum > target) & ~done
        hi[high] = mid[high]
        mid[high] = (lo[high] + hi[high]) / 2.0
        low = (psum <= target) & ~done
        lo[low] = mid[low]
        unbounded = low & np.isinf(hi)
        mid[unbounded] = mid[unbounded] * 2.0
        bounded = low & ~np.isinf(hi)
        mid[bounded] = (lo[bounded] + hi[bounded]) / 2.0
        if done.all():
            break
    sigma = mid
    row_mean = knn_dists.mean(axis=1)
    all_mean = knn_dists.mean()
    floor = np.where(rho > 0.0, _MIN_SIGMA_SCALE * row_mean, _MIN_SIGMA_SCALE * all_mean)
    return np.maximum(sigma, floor), rho


def _membership(
    knn_idx: np.ndarray,
    knn_dists: np.ndarray,
    sigma: np.ndarray,
    rho: np.ndarray,
    self_rows: bool,
) -> np.ndarray:
    """Edge weights exp(-(d - rho)/sigma); self edges get 0 when self_rows."""
    gap = knn_dists - rho[:, None]
    with np.errstate(divide="ignore"):
        vals = np.where(gap <= 0, 1.0, np.exp(-gap / np.maximum(sigma[:, None], 1e-300)))
    vals = np.where(sigma[:, None] == 0.0, np.where(gap <= 0, 1.0, 1.0), vals)
    if self_rows:
        rows = np.arange(knn_idx.shape[0])[:, None]
        vals = np.where(knn_idx == rows, 0.0, vals)
    return vals


class UmapReducer:
    """Nonlinear reducer over the fuzzy k-NN graph.

    fit() builds the exact Euclidean k-NN graph, converts it to symmetric
    fuzzy weights, initializes from PCA and runs negative-sampling SGD for
    the configured epochs. transform() places each new point at the
    membership-weighted barycenter of its nearest fitted points' images.
    """

    kind = "umap"

    def __init__(
        self,
        out_dims: int = 16,
        n_neighbors: int = 15,
        min_dist: float = 0.1,
        epochs: int = 200,
        seed: int = 0,
    ):
        self.out_dims = out_dims
        self.n_neighbors = n_neighbors
        self.min_dist = min_dist
        self.epochs = epochs
        self.seed = seed

    def fit(self, X: np.ndarray) -> "UmapReducer":
        self.fit_transform(X)
        return self

    def _graph(self, X: np.ndarray) -> np.ndarray:
        knn_idx, knn_dists = _knn(X, X, self.n_neighbors)
        sigma, rho = _smooth_knn(knn_dists, float(self.n_neighbors))
        vals = _membership(knn_idx, knn_dists, sigma, rho, self_rows=True)
        n = X.shape[0]
        W = np.zeros((n, n), dtype=np.float64)
        rows = np.repeat(np.arange(n), self.n_neighbors)
        np.maximum.at(W, (rows, knn_idx.ravel()), vals.ravel())
        # probabilistic t-conorm symmetrization
        Wt = W.T
        return W + Wt - W * Wt

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        X = _check_finite(X)
        n = X.shape[0]
        if n <= self.n_neighbors:
            raise ValueError(
                f"need > n_neighbors={self.n_neighbors} rows, got {n}"
            )
        if self.out_dims >= X.shape[1]:
            raise ValueError("out_dims must be < input dims")
        graph = self._graph(X)
        if self.epochs > 10:
            cutoff = graph.max() / float(self.epochs)
            graph[graph < cutoff] = 0.0

        head, tail = np.nonzero(graph)
        weights = graph[head, tail]
        if weights.size == 0:
            raise ValueError("empty fuzzy graph; inputs may be degenerate")
        epochs_per_sample = weights.max() / weights

        emb = PCAReducer(self.out_dims).fit_transform(X)
        peak = np.abs(emb).max()
        if peak > 0:
            emb = emb * (10.0 / peak)
        emb = np.ascontiguousarray(emb, dtype=np.float64)

        a, b = find_curve_params(self.min_dist)
        rng_state = _kernels.seed_rng_state(self.seed)
        _kernels.umap_layout_epochs(
            emb,
            head.astype(np.int64),
            tail.astype(np.int64),
            int(self.epochs),
            np.ascontiguousarray(epochs_per_sample, dtype=np.float64),
            float(a),
            float(b),
            1.0,  # repulsion weight
            1.0,  # initial learning rate
            5,  # negative samples per edge visit
            rng_state,
        )
        self.a_, self.b_ = a, b
        self.train_data_ = X
        self.train_embedding_ = emb
        return emb

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = _check_finite(X)
        if not hasattr(self, "train_data_"):
            raise RuntimeError("reducer used before fit")
        if X.shape[1] != self.train_data_.shape[1]:
            raise ValueError(
                f"expected {self.train_data_.shape[1]} dims, got {X.shape[1]}"
            )
        if X.shape[0] == 0:
            return np.zeros((0, self.out_dims), dtype=np.float64)
        k = min(self.n_neighbors, self.train_data_.shape[0])
        knn_idx, knn_dists = _knn(X, self.train_data_, k)
        sigma, rho = _smooth_knn(knn_dists, float(k))
        vals = _membership(knn_idx, knn_dists, sigma, rho, self_rows=False)
        sums = vals.sum(axis=1, keepdims=True)
        uniform = np.full_like(vals, 1.0 / k)
        weights = np.where(sums > 0, vals / np.maximum(sums, 1e-300), uniform)
        return np.einsum("nk,nkd->nd", weights, self.train_embedding_[knn_idx])


def save_reducer(reducer, directory) -> None:
    """Persist a fitted reducer: component matrices as EMBV1, scalars as
    JSON (meta.json)."""
    import json
    from pathlib import Path

    from priopipe.embedding import save_embeddings

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta: dict = {"kind": reducer.kind}
    if isinstance(reducer, PCAReducer):
        meta.update(
            out_dims=reducer.out_dims,
            mean=[float(v) for v in reducer.mean_],
            singular_values=[float(v) for v in reducer.singular_values_],
        )
        save_embeddings(
            EmbeddingMatrix(
                reducer.components_.astype(np.float32),
                tuple(f"component{i}" for i in range(reducer.components_.shape[0])),
            ),
            directory / "components.embv1",
        )
    elif isinstance(reducer, UmapReducer):
        meta.update(
            out_dims=reducer.out_dims,
            n_neighbors=reducer.n_neighbors,
            min_dist=reducer.min_dist,
            epochs=reducer.epochs,
            seed=reducer.seed,
            a=float(reducer.a_),
            b=float(reducer.b_),
        )
        save_embeddings(
            EmbeddingMatrix(
                reducer.train_embedding_.astype(np.float32),
                tuple(f"row{i}" for i in range(reducer.train_embedding_.shape[0])),
            ),
            directory / "train_embedding.embv1",
        )
    (directory / "meta.json").write_text(json.dumps(meta, indent=2))


def make_reducer(config: ReducerConfig):
    config.validate()
    if config.kind == "none":
        return IdentityReducer()
    if config.kind == "pca":
        return PCAReducer(config.out_dims)
    return UmapReducer(
        out_dims=config.out_dims,
        n_neighbors=config.n_neighbors,
        min_dist=config.min_dist,
        epochs=config.epochs,
        seed=config.seed,
    )


def fit_transform(config: ReducerConfig, matrix: EmbeddingMatrix):
    """Fit on the matrix and return (reduced EmbeddingMatrix, fitted reducer).

    Row count and manifest order are preserved; kind="none" returns the
    input unchanged.
    """
    config.validate(in_dims=matrix.dims)
    reducer = make_reducer(config)
    if config.kind == "none":
        reducer.fit(matrix.data)
        return matrix, reducer
    reduced = reducer.fit_transform(matrix.data.astype(np.float64))
    return matrix.with_data(reduced.astype(np.float32)), reducer
