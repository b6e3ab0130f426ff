"""Clustering over embedding space: Lloyd k-means, agglomerative linkage,
and density-based hierarchical clustering with noise detection.

All algorithms use Euclidean distance in whatever space they receive,
return dense cluster ids in [0, k), and are deterministic given their
inputs (and seed, where one applies). Only the density-based algorithm
emits the noise label -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ClusterResult", "kmeans", "agglomerative", "hdbscan"]

LINKAGES = ("single", "average", "ward")


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray  # per-row cluster id, -1 = noise
    k: int
    centroids: dict[int, np.ndarray] | None = None
    inertia_history: tuple[float, ...] = field(default=(), repr=False)

    def as_dict(self) -> dict:
        return {
            "labels": [int(v) for v in self.labels],
            "k": self.k,
            "centroids": {
                str(c): [float(x) for x in v] for c, v in self.centroids.items()
            }
            if self.centroids is not None
            else None,
        }


def _as_matrix(X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected 2-D data, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("non-finite values in clustering input")
    return X


def _sq_dists_to(X: np.ndarray, points: np.ndarray) -> np.ndarray:
    sq = (
        (X * X).sum(axis=1)[:, None]
        + (points * points).sum(axis=1)[None, :]
        - 2.0 * (X @ points.T)
    )
    return np.maximum(sq, 0.0)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists_to(X, X[chosen[-1:]]).ravel()
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass at distance zero: take the lowest-index
            # point not already chosen
            taken = set(chosen)
            nxt = next(i for i in range(n) if i not in taken)
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists_to(X, X[nxt : nxt + 1]).ravel())
    return X[chosen].copy()


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iter: int = 100) -> ClusterResult:
    """Lloyd iterations from k-means++ seeding.

    Nearest-centroid ties resolve to the lowest centroid id. A cluster that
    empties is re-seeded at the point farthest from its assigned centroid.
    Stops when assignments are a fixed point or after max_iter rounds;
    recorded inertia is non-increasing.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one row")
    if k > n:
        raise ValueError(f"k={k} exceeds row count {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(X, k, rng)
    prev = None
    inertia_history: list[float] = []
    for _ in range(max_iter):
        d2 = _sq_dists_to(X, centroids)
        assign = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), assign]
        repaired = False
        sizes = np.bincount(assign, minlength=k)
        repair_d2 = point_d2.copy()
        for c in range(k):
            if sizes[c] > 0:
                continue
            # steal the farthest point whose cluster can spare it; pigeonhole
            # guarantees such a point exists while any cluster is empty
            candidates = np.where(sizes[assign] > 1, repair_d2, -np.inf)
            far = int(candidates.argmax())
            sizes[assign[far]] -= 1
            sizes[c] = 1
            centroids[c] = X[far]
            assign[far] = c
            point_d2[far] = 0.0
            repair_d2[far] = -np.inf
            repaired = True
        inertia_history.append(float(point_d2.sum()))
        if prev is not None and not repaired and np.array_equal(assign, prev):
            break
        for c in range(k):
            centroids[c] = X[assign == c].mean(axis=0)
        prev = assign
    return ClusterResult(
        labels=assign.astype(np.int64),
        k=k,
        centroids={c: centroids[c].copy() for c in range(k)},
        inertia_history=tuple(inertia_history),
    )


def agglomerative(X: np.ndarray, k: int, linkage: str = "ward") -> ClusterResult:
    """Bottom-up merging until k clusters remain.

    The globally closest active pair merges at each step; distance ties
    break on the smaller (i, j) pair. Inter-cluster distances follow the
    Lance-Williams update for the chosen linkage (ward distances are
    Euclidean-based). Deterministic.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"invalid linkage {linkage!r}; expected one of {LINKAGES}")
    X = _as_matrix(X)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")

    D = np.sqrt(_sq_dists_to(X, X))
    np.fill_diagonal(D, np.inf)
    active = np.ones(n, dtype=bool)
    sizes = np.ones(n, dtype=np.int64)
    members: list[list[int] | None] = [[i] for i in range(n)]
    row_min = D.min(axis=1)
    row_arg = D.argmin(axis=1)
    merge_distances: list[float] = []

    for _ in range(n - k):
        # argmin picks the first minimum, so distance ties resolve to the
        # lexicographically smallest (i, j) pair
        best_i = int(np.where(active, row_min, np.inf).argmin())
        j = int(row_arg[best_i])
        i, j = (best_i, j) if best_i < j else (j, best_i)
        d_ij = D[i, j]
        merge_distances.append(float(d_ij))

        others = active.copy()
        others[i] = others[j] = False
        d_i = D[i, others]
        d_j = D[j, others]
        if linkage == "single":
            merged = np.minimum(d_i, d_j)
        elif linkage == "average":
            merged = (sizes[i] * d_i + sizes[j] * d_j) / (sizes[i] + sizes[j])
        else:  # ward
            n_h = sizes[others].astype(np.float64)
            n_i, n_j = float(sizes[i]), float(sizes[j])
            merged = np.sqrt(
                (
                    (n_h + n_i) * d_i**2
                    + (n_h + n_j) * d_j**2
                    - n_h * d_ij**2
                )
                / (n_h + n_i + n_j)
            )
        D[i, others] = merged
        D[others, i] = merged
        D[i, i] = np.inf
        D[j, :] = np.inf
        D[:, j] = np.inf
        active[j] = False
        sizes[i] += sizes[j]
        members[i].extend(members[j])  # type: ignore[union-attr]
        members[j] = None

        row_min[i] = D[i].min()
        row_arg[i] = D[i].argmin()
        stale = active & ((row_arg == i) | (row_arg == j))
        stale[i] = False
        for h in np.where(stale)[0]:
            row_min[h] = D[h].min()
            row_arg[h] = D[h].argmin()
        # rows whose distance to the merged cluster shrank below their cache
        closer = np.where(active & (D[:, i] < row_min))[0]
        for h in closer:
            if h != i:
                row_min[h] = D[h, i]
                row_arg[h] = i

    labels = np.full(n, -1, dtype=np.int64)
    final = [i for i in range(n) if active[i]]
    final.sort(key=lambda i: min(members[i]))  # type: ignore[arg-type]
    for cid, i in enumerate(final):
        labels[list(members[i])] = cid  # type: ignore[arg-type]
    return ClusterResult(
        labels=labels, k=k, inertia_history=tuple(merge_distances)
    )


# --- density-based hierarchical clustering -------------------------------


def _mst_edges(weights: np.ndarray) -> np.ndarray:
    """Prim's algorithm on a dense symmetric weight matrix; (n-1, 3) rows
    (u, v, w) in insertion order."""
    n = weights.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = weights[0].copy()
    best_from = np.zeros(n, dtype=np.int64)
    best[0] = np.inf
    edges = np.empty((n - 1, 3), dtype=np.float64)
    for t in range(n - 1):
        v = int(best.argmin())
        edges[t] = (best_from[v], v, best[v])
        in_tree[v] = True
        best[v] = np.inf
        closer = weights[v] < best
        closer &= ~in_tree
        best[closer] = weights[v][closer]
        best_from[closer] = v
    return edges


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(2 * n - 1, dtype=np.int64)
        self.size = np.concatenate(
            [np.ones(n, dtype=np.int64), np.zeros(n - 1, dtype=np.int64)]
        )
        self.next_label = n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        label = self.next_label
        self.parent[a] = label
        self.parent[b] = label
        self.size[label] = self.size[a] + self.size[b]
        self.next_label += 1
        return label


def _single_linkage(edges: np.ndarray, n: int) -> np.ndarray:
    """scipy-style merge list: row t = (left, right, distance, size) and the
    merged node gets id n + t."""
    order = np.argsort(edges[:, 2], kind="stable")
    uf = _UnionFind(n)
    merges = np.empty((n - 1, 4), dtype=np.float64)
    for t, e in enumerate(order):
        u, v, w = edges[e]
        ru, rv = uf.find(int(u)), uf.find(int(v))
        merges[t] = (ru, rv, w, uf.size[ru] + uf.size[rv])
        uf.union(ru, rv)
    return merges


def _condense(merges: np.ndarray, n: int, min_cluster_size: int):
    """Collapse the dendrogram: subtrees below min_cluster_size fall out of
    their parent cluster as points. Returns parallel row arrays
    (parent, child, lambda, size) where child < n means a point."""
    root = 2 * n - 2
    children: dict[int, tuple[int, int, float]] = {}
    counts = np.ones(2 * n - 1, dtype=np.int64)
    for t in range(n - 1):
        left, right, dist, _ = merges[t]
        node = n + t
        children[node] = (int(left), int(right), float(dist))
        counts[node] = counts[int(left)] + counts[int(right)]

    def leaves(node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            cur = stack.pop()
            if cur < n:
                out.append(cur)
            else:
                left, right, _ = children[cur]
                stack.extend((left, right))
        return out

    relabel = {root: n}
    next_label = n + 1
    parents: list[int] = []
    childs: list[int] = []
    lambdas: list[float] = []
    sizes: list[int] = []
    ignore: set[int] = set()
    bfs = [root]
    while bfs:
        node = bfs.pop(0)
        if node in ignore or node < n:
            continue
        left, right, dist = children[node]
        lam = 1.0 / dist if dist > 0.0 else np.inf
        rel = relabel[node]
        big_left = counts[left] >= min_cluster_size
        big_right = counts[right] >= min_cluster_size
        if big_left and big_right:
            for child in (left, right):
                relabel[child] = next_label
                next_label += 1
                parents.append(rel)
                childs.append(relabel[child])
                lambdas.append(lam)
                sizes.append(int(counts[child]))
            bfs.extend((left, right))
        elif not big_left and not big_right:
            for p in leaves(left) + leaves(right):
                parents.append(rel)
                childs.append(p)
                lambdas.append(lam)
                sizes.append(1)
            ignore.update((left, right))
        else:
            keep, drop = (left, right) if big_left else (right, left)
            relabel[keep] = rel
            for p in leaves(drop):
                parents.append(rel)
                childs.append(p)
                lambdas.append(lam)
                sizes.append(1)
            ignore.add(drop)
            bfs.extend((left, right))
    return (
        np.asarray(parents, dtype=np.int64),
        np.asarray(childs, dtype=np.int64),
        np.asarray(lambdas, dtype=np.float64),
        np.asarray(sizes, dtype=np.int64),
    )


def _stability(parents, childs, lambdas, sizes, n: int) -> dict[int, float]:
    births: dict[int, float] = {int(n): 0.0}
    for p, c, lam in zip(parents, childs, lambdas):
        if c >= n:
            births[int(c)] = float(lam)
    stability: dict[int, float] = {c: 0.0 for c in births}
    for p, lam, size in zip(parents, lambdas, sizes):
        stability[int(p)] += (float(lam) - births[int(p)]) * int(size)
    return stability


def _select_eom(parents, childs, stability: dict[int, float], n: int) -> set[int]:
    """Excess-of-mass selection over non-root clusters: a cluster wins when
    it is at least as stable as the sum of its child clusters."""
    tree_children: dict[int, list[int]] = {}
    for p, c in zip(parents, childs):
        if c >= n:
            tree_children.setdefault(int(p), []).append(int(c))
    is_cluster = {c: True for c in stability if c != n}
    totals = dict(stability)
    for node in sorted(is_cluster, reverse=True):
        subtree = sum(totals[ch] for ch in tree_children.get(node, ()))
        if subtree > totals[node]:
            is_cluster[node] = False
            totals[node] = subtree
        else:
            # deselect every descendant cluster
            stack = list(tree_children.get(node, ()))
            while stack:
                cur = stack.pop()
                is_cluster[cur] = False
                stack.extend(tree_children.get(cur, ()))
    return {c for c, flag in is_cluster.items() if flag}


def hdbscan(
    X: np.ndarray, min_cluster_size: int = 15, min_samples: int = 5
) -> ClusterResult:
    """Density-based hierarchical clustering with noise.

    Pipeline: core distances (distance to the min_samples-th neighbor),
    mutual-reachability weights max(core_i, core_j, d_ij), Prim minimum
    spanning tree, single-linkage hierarchy, condensed tree at
    min_cluster_size, excess-of-mass cluster selection. Points outside every
    selected cluster are labeled -1. When no subcluster is ever selected
    (e.g. all points identical) the result is a single all-points cluster.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    if n < min_cluster_size:
        raise ValueError(f"need at least min_cluster_size={min_cluster_size} rows")
    if min_samples < 1 or min_samples > n:
        raise ValueError(f"min_samples={min_samples} outside [1, {n}]")

    D = np.sqrt(_sq_dists_to(X, X))
    # row includes the self distance at rank 0, so index min_samples is the
    # min_samples-th nearest other point
    core = np.sort(D, axis=1)[:, min_samples if min_samples < n else n - 1]
    mreach = np.maximum(D, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mreach, np.inf)

    edges = _mst_edges(mreach)
    merges = _single_linkage(edges, n)
    parents, childs, lambdas, sizes = _condense(merges, n, min_cluster_size)
    stability = _stability(parents, childs, lambdas, sizes, n)
    selected = _select_eom(parents, childs, stability, n)

    labels = np.full(n, -1, dtype=np.int64)
    if not selected:
        labels[:] = 0
        return ClusterResult(labels=labels, k=1)

    cluster_parent = {int(c): int(p) for p, c in zip(parents, childs) if c >= n}
    point_parent = {int(c): int(p) for p, c in zip(parents, childs) if c < n}
    owner: dict[int, int] = {}
    for point in range(n):
        node = point_parent[point]
        while node is not None:
            if node in selected:
                owner[point] = node
                break
            node = cluster_parent.get(node)

    ordered = sorted(
        selected, key=lambda c: min(p for p, o in owner.items() if o == c)
    )
    cid = {c: i for i, c in enumerate(ordered)}
    for point, node in owner.items():
        labels[point] = cid[node]
    return ClusterResult(labels=labels, k=len(ordered))
