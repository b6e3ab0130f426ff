"""Shared test utilities: independent oracles and synthetic fixtures.

The oracles here are deliberately naive (exact rational arithmetic, brute
force enumeration) and never call the implementation paths they check.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from math import comb

import numpy as np


def adjusted_rand(a, b) -> float:
    """Contingency-table ARI, direct from the pair-counting definition."""
    a = np.asarray(a)
    b = np.asarray(b)
    ua, ub = np.unique(a), np.unique(b)
    cont = np.zeros((len(ua), len(ub)), dtype=np.int64)
    for i, x in enumerate(ua):
        for j, y in enumerate(ub):
            cont[i, j] = int(((a == x) & (b == y)).sum())
    sum_ij = sum(comb(int(v), 2) for v in cont.ravel())
    sum_a = sum(comb(int(v), 2) for v in cont.sum(axis=1))
    sum_b = sum(comb(int(v), 2) for v in cont.sum(axis=0))
    total = comb(len(a), 2)
    expected = sum_a * sum_b / total
    denom = (sum_a + sum_b) / 2 - expected
    if denom == 0:
        return 1.0
    return (sum_ij - expected) / denom


def rational_accuracy(cm) -> Fraction:
    cm = np.asarray(cm, dtype=object)
    return Fraction(int(np.trace(cm)), int(cm.sum()))


def rational_macro_f1(cm) -> Fraction:
    cm = np.asarray(cm)
    k = cm.shape[0]
    total = Fraction(0)
    for c in range(k):
        tp = int(cm[c, c])
        support = int(cm[c].sum())
        predicted = int(cm[:, c].sum())
        denom = support + predicted
        total += Fraction(2 * tp, denom) if denom else Fraction(0)
    return total / k


def rational_kappa(cm, weighting="none") -> Fraction:
    cm = np.asarray(cm)
    k = cm.shape[0]
    total = int(cm.sum())

    def weight(i, j):
        if weighting == "none":
            return Fraction(int(i != j))
        if weighting == "linear":
            return Fraction(abs(i - j), k - 1)
        if weighting == "quadratic":
            return Fraction(abs(i - j), k - 1) ** 2
        raise ValueError(weighting)

    rows = cm.sum(axis=1)
    cols = cm.sum(axis=0)
    obs = Fraction(0)
    exp = Fraction(0)
    for i in range(k):
        for j in range(k):
            w = weight(i, j)
            obs += w * Fraction(int(cm[i, j]), total)
            exp += w * Fraction(int(rows[i]) * int(cols[j]), total * total)
    if exp == 0:
        raise ZeroDivisionError("kappa undefined")
    return 1 - obs / exp


def brute_force_assignment(cost) -> float:
    """Minimum assignment cost on a square matrix by exhaustive permutation."""
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    return min(
        sum(cost[i, p[i]] for i in range(n)) for p in permutations(range(n))
    )


def gaussian_blobs(n_per: int, centers, scale: float, seed: int, dims: int | None = None):
    """Well-separated Gaussian blobs plus their ground-truth labels."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    if dims is not None and centers.shape[1] != dims:
        raise ValueError("centers do not match dims")
    X = np.vstack([rng.normal(c, scale, size=(n_per, centers.shape[1])) for c in centers])
    y = np.repeat(np.arange(centers.shape[0]), n_per)
    return X, y


def two_blob_noise_fixture(seed: int = 0):
    """Two dense 2-D blobs (100 points each, sigma=0.1, centers 10 apart)
    plus 20 sparse uniform background points. The background box is wide
    enough that its points join the hierarchy above the inter-blob bridge,
    keeping the density gap decisive."""
    rng = np.random.default_rng(seed)
    a = rng.normal((0.0, 0.0), 0.1, size=(100, 2))
    b = rng.normal((10.0, 0.0), 0.1, size=(100, 2))
    background = rng.uniform(-30.0, 40.0, size=(20, 2))
    return np.vstack([a, b, background])
