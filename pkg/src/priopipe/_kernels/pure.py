"""Pure-Python mirrors of the compiled kernels.

These are the fallback used when the extension module is unavailable (or
when PRIOPIPE_PURE is set). Every arithmetic operation is written in the
same order as the C code so both backends produce bit-identical results;
keep the two files in lockstep when changing either.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "pure"

_MASK32 = 0xFFFFFFFF


def _tau_step(state) -> int:
    # Three-component Tausworthe generator over uint32 state.
    s0 = int(state[0])
    s1 = int(state[1])
    s2 = int(state[2])
    b = ((((s0 << 13) & _MASK32) ^ s0) >> 19) & _MASK32
    s0 = (((s0 & 4294967294) << 12) & _MASK32) ^ b
    b = ((((s1 << 2) & _MASK32) ^ s1) >> 25) & _MASK32
    s1 = (((s1 & 4294967288) << 4) & _MASK32) ^ b
    b = ((((s2 << 3) & _MASK32) ^ s2) >> 11) & _MASK32
    s2 = (((s2 & 4294967280) << 17) & _MASK32) ^ b
    state[0] = s0
    state[1] = s1
    state[2] = s2
    return s0 ^ s1 ^ s2


def umap_layout_epochs(
    emb: np.ndarray,
    head: np.ndarray,
    tail: np.ndarray,
    n_epochs: int,
    epochs_per_sample: np.ndarray,
    a: float,
    b: float,
    gamma: float,
    initial_alpha: float,
    negative_sample_rate: int,
    rng_state: np.ndarray,
) -> None:
    """Negative-sampling SGD over graph edges, updating `emb` in place.

    Edge i connects rows head[i] -> tail[i] and is revisited every
    epochs_per_sample[i] epochs; each visit applies one attractive update
    and `negative_sample_rate`-scheduled repulsive updates against random
    rows. Per-dimension gradient steps are clipped to [-4, 4]. Sequential
    and deterministic given rng_state.
    """
    n_vertices, dim = emb.shape
    n_edges = head.shape[0]
    epochs_per_negative_sample = [
        float(epochs_per_sample[i]) / negative_sample_rate for i in range(n_edges)
    ]
    epoch_of_next_sample = [float(epochs_per_sample[i]) for i in range(n_edges)]
    epoch_of_next_negative_sample = list(epochs_per_negative_sample)
    alpha = initial_alpha

    for n in range(n_epochs):
        for i in range(n_edges):
            if epoch_of_next_sample[i] > n:
                continue
            j = int(head[i])
            k = int(tail[i])

            dist_squared = 0.0
            for d in range(dim):
                diff = emb[j, d] - emb[k, d]
                dist_squared += diff * diff
            if dist_squared > 0.0:
                grad_coeff = -2.0 * a * b * math.pow(dist_squared, b - 1.0)
                grad_coeff /= a * math.pow(dist_squared, b) + 1.0
            else:
                grad_coeff = 0.0
            for d in range(dim):
                grad_d = grad_coeff * (emb[j, d] - emb[k, d])
                if grad_d > 4.0:
                    grad_d = 4.0
                elif grad_d < -4.0:
                    grad_d = -4.0
                emb[j, d] += grad_d * alpha
                emb[k, d] -= grad_d * alpha

            epoch_of_next_sample[i] += float(epochs_per_sample[i])

            n_neg_samples = int(
                (n - epoch_of_next_negative_sample[i]) / epochs_per_negative_sample[i]
            )
            for _ in range(n_neg_samples):
                k = _tau_step(rng_state) % n_vertices
                dist_squared = 0.0
                for d in range(dim):
                    diff = emb[j, d] - emb[k, d]
                    dist_squared += diff * diff
                if dist_squared > 0.0:
                    grad_coeff = 2.0 * gamma * b
                    grad_coeff /= (0.001 + dist_squared) * (
                        a * math.pow(dist_squared, b) + 1.0
                    )
                elif j == k:
                    continue
                else:
                    grad_coeff = 0.0
                for d in range(dim):
                    if grad_coeff > 0.0:
                        grad_d = grad_coeff * (emb[j, d] - emb[k, d])
                        if grad_d > 4.0:
                            grad_d = 4.0
                        elif grad_d < -4.0:
                            grad_d = -4.0
                    else:
                        grad_d = 4.0
                    emb[j, d] += grad_d * alpha

            epoch_of_next_negative_sample[i] += (
                n_neg_samples * epochs_per_negative_sample[i]
            )
        alpha = initial_alpha * (1.0 - float(n) / float(n_epochs))


def scan_split_gini(values: np.ndarray, labels: np.ndarray, n_classes: int):
    """Best Gini split over column-sorted candidate features.

    `values` is (m, f) with each column ascending; `labels` holds the class
    of the row that produced each sorted cell, so every column must be a
    permutation of the same label multiset. Split position r puts sorted
    rows [0, r) left. Returns (col, row, cost) with cost the weighted Gini
    impurity of the children; col == -1 when no column has two distinct
    values. Ties keep the earliest (column, position).
    """
    m, f = values.shape
    cnt_total = [0] * n_classes
    for r in range(m):
        cnt_total[int(labels[r, 0])] += 1
    sq_total = 0
    for c in range(n_classes):
        sq_total += cnt_total[c] * cnt_total[c]

    best_col = -1
    best_row = -1
    best_cost = math.inf
    cnt_l = [0] * n_classes
    cnt_r = [0] * n_classes
    for col in range(f):
        for c in range(n_classes):
            cnt_l[c] = 0
            cnt_r[c] = cnt_total[c]
        sl = 0
        sr = sq_total
        for r in range(1, m):
            cls = int(labels[r - 1, col])
            sl += 2 * cnt_l[cls] + 1
            cnt_l[cls] += 1
            sr -= 2 * cnt_r[cls] - 1
            cnt_r[cls] -= 1
            if values[r, col] > values[r - 1, col]:
                n_l = r
                n_r = m - r
                cost = ((n_l - sl / n_l) + (n_r - sr / n_r)) / m
                if cost < best_cost:
                    best_cost = cost
                    best_col = col
                    best_row = r
    return best_col, best_row, best_cost


def scan_split_mse(values: np.ndarray, grads: np.ndarray):
    """Best squared-error split over column-sorted candidate features.

    Minimizes the summed squared deviation of the two children, reported as
    cost = -(sum_l^2/n_l + sum_r^2/n_r) so lower is better on the same node.
    Same conventions as scan_split_gini.
    """
    m, f = values.shape
    best_col = -1
    best_row = -1
    best_cost = math.inf
    for col in range(f):
        total = 0.0
        for r in range(m):
            total += grads[r, col]
        s_l = 0.0
        for r in range(1, m):
            s_l += grads[r - 1, col]
            if values[r, col] > values[r - 1, col]:
                n_l = r
                n_r = m - r
                s_r = total - s_l
                cost = -(s_l * s_l / n_l + s_r * s_r / n_r)
                if cost < best_cost:
                    best_cost = cost
                    best_col = col
                    best_row = r
    return best_col, best_row, best_cost
