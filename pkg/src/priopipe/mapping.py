"""Cluster-to-label assignment strategies and direct centroid classification.

A clustering produces unlabeled cluster ids; these strategies turn them
into combined-class predictions using the training labels: modal label per
cluster, optimal one-to-one matching (Hungarian), or cosine similarity
between cluster centroids and class centroids. Noise rows (cluster -1) and
clusters left unmatched always fall back to a defined class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from priopipe.clustering import ClusterResult
from priopipe.embedding import class_centroids

__all__ = [
    "ClusterLabelMap",
    "hungarian_solve",
    "majority_map",
    "hungarian_map",
    "cosine_centroid_map",
    "apply_map",
    "direct_centroid_classify",
]

STRATEGIES = ("majority", "hungarian", "cosine_full", "cosine_reduced")


@dataclass(frozen=True)
class ClusterLabelMap:
    assignment: dict[int, int]  # cluster id -> combined class
    fallback: int
    strategy: str

    def as_dict(self) -> dict:
        return {
            "assignment": {str(c): int(l) for c, l in self.assignment.items()},
            "fallback": int(self.fallback),
            "strategy": self.strategy,
        }


def _modal(values: np.ndarray) -> int:
    # bincount argmax: ties resolve to the smaller class index
    return int(np.bincount(values).argmax())


def _cluster_label_counts(
    clusters: ClusterResult, train_labels: np.ndarray
) -> list[np.ndarray]:
    labels = np.asarray(train_labels, dtype=np.int64)
    if labels.shape[0] != clusters.labels.shape[0]:
        raise ValueError("train labels not aligned with cluster labels")
    return [labels[clusters.labels == c] for c in range(clusters.k)]


def majority_map(clusters: ClusterResult, train_labels: np.ndarray) -> ClusterLabelMap:
    """Each cluster maps to its most frequent training label; label ties
    take the smaller class index. Fallback is the global modal class."""
    labels = np.asarray(train_labels, dtype=np.int64)
    per_cluster = _cluster_label_counts(clusters, labels)
    assignment = {c: _modal(vals) for c, vals in enumerate(per_cluster) if vals.size}
    return ClusterLabelMap(
        assignment=assignment, fallback=_modal(labels), strategy="majority"
    )


def hungarian_solve(cost: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost one-to-one assignment on a rectangular cost matrix.

    The matrix is padded to square with zero-cost dummy cells; rows/columns
    matched to dummies are omitted from the result. Returns (pairs, total)
    with pairs sorted by row. O(s^3) shortest-augmenting-path with
    potentials.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError(f"cost must be a non-empty 2-D matrix, got {cost.shape}")
    if not np.isfinite(cost).all():
        raise ValueError("non-finite entry in cost matrix")
    n, m = cost.shape
    s = max(n, m)
    a = np.zeros((s, s), dtype=np.float64)
    a[:n, :m] = cost

    INF = np.inf
    u = np.zeros(s + 1)
    v = np.zeros(s + 1)
    match = np.zeros(s + 1, dtype=np.int64)  # col -> row (1-based, 0 = free)
    way = np.zeros(s + 1, dtype=np.int64)
    for i in range(1, s + 1):
        match[0] = i
        j0 = 0
        minv = np.full(s + 1, INF)
        used = np.zeros(s + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = INF
            j1 = -1
            for j in range(1, s + 1):
                if used[j]:
                    continue
                cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(s + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    pairs = []
    total = 0.0
    for j in range(1, s + 1):
        row, col = int(match[j]) - 1, j - 1
        if row < n and col < m:
            pairs.append((row, col))
            total += float(cost[row, col])
    pairs.sort()
    return pairs, total


def hungarian_map(clusters: ClusterResult, train_labels: np.ndarray) -> ClusterLabelMap:
    """Optimal cluster/label matching.

    cost[c][l] = |cluster c| - count(label l in cluster c) over the labels
    observed in training. Clusters matched to dummy columns (more clusters
    than labels) fall back to their own majority label; noise falls back to
    the global modal class.
    """
    labels = np.asarray(train_labels, dtype=np.int64)
    per_cluster = _cluster_label_counts(clusters, labels)
    observed = sorted(int(c) for c in np.unique(labels))
    if clusters.k == 0:
        return ClusterLabelMap({}, _modal(labels), "hungarian")
    cost = np.empty((clusters.k, len(observed)), dtype=np.float64)
    for c, vals in enumerate(per_cluster):
        counts = np.bincount(vals, minlength=max(observed) + 1)
        for col, lab in enumerate(observed):
            cost[c, col] = vals.size - counts[lab]
    pairs, _ = hungarian_solve(cost)
    assignment = {c: observed[col] for c, col in pairs}
    for c, vals in enumerate(per_cluster):
        if c not in assignment and vals.size:
            assignment[c] = _modal(vals)
    return ClusterLabelMap(assignment, _modal(labels), "hungarian")


def _cosine_argmax(vec: np.ndarray, cents: dict[int, np.ndarray]) -> int:
    best_cls = -1
    best = -np.inf
    norm_v = float(np.linalg.norm(vec))
    for cls in sorted(cents):
        cv = cents[cls]
        norm_c = float(np.linalg.norm(cv))
        sim = 0.0 if norm_v == 0.0 or norm_c == 0.0 else float(
            np.dot(vec, cv) / (norm_v * norm_c)
        )
        if sim > best:
            best = sim
            best_cls = cls
    return best_cls


def cosine_centroid_map(
    clusters: ClusterResult,
    data: np.ndarray,
    class_cents: dict[int, np.ndarray],
    train_labels: np.ndarray,
    space: str = "full",
) -> ClusterLabelMap:
    """Assign each cluster to the class whose centroid is most cosine-similar
    to the cluster centroid, both computed in the same space (`data` must be
    the train matrix in that space). Ties take the smaller class index."""
    if space not in ("full", "reduced"):
        raise ValueError(f"space must be 'full' or 'reduced', got {space!r}")
    data = np.asarray(data, dtype=np.float64)
    if data.shape[0] != clusters.labels.shape[0]:
        raise ValueError("data rows not aligned with cluster labels")
    labels = np.asarray(train_labels, dtype=np.int64)
    assignment = {}
    for c in range(clusters.k):
        member = clusters.labels == c
        if member.any():
            assignment[c] = _cosine_argmax(data[member].mean(axis=0), class_cents)
    strategy = "cosine_reduced" if space == "reduced" else "cosine_full"
    return ClusterLabelMap(assignment, _modal(labels), strategy)


def apply_map(clusters: ClusterResult, label_map: ClusterLabelMap) -> np.ndarray:
    """Per-row prediction: mapped class of the row's cluster, fallback for
    noise rows or unmapped clusters."""
    out = np.empty(clusters.labels.shape[0], dtype=np.int64)
    for i, c in enumerate(clusters.labels):
        out[i] = label_map.assignment.get(int(c), label_map.fallback)
    return out


def direct_centroid_classify(
    rows: np.ndarray, class_cents: dict[int, np.ndarray]
) -> np.ndarray:
    """Nearest class centroid by cosine, per row, without a clustering stage."""
    rows = np.asarray(rows, dtype=np.float64)
    classes = sorted(class_cents)
    cents = np.stack([class_cents[c] for c in classes]).astype(np.float64)
    cent_norms = np.linalg.norm(cents, axis=1)
    row_norms = np.linalg.norm(rows, axis=1)
    denom = np.outer(row_norms, cent_norms)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0, rows @ cents.T / np.where(denom > 0, denom, 1.0), 0.0)
    picks = sims.argmax(axis=1)
    return np.asarray([classes[p] for p in picks], dtype=np.int64)
