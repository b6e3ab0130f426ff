# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: UMAP-style SGD layout and CART split scans.

Mirrors priopipe._kernels.pure operation-for-operation (same expression
order, libm pow/exp, integer count arithmetic) so the two backends return
bit-identical results. Keep in lockstep with pure.py.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, pow

BACKEND = "compiled"

cnp.import_array()


cdef inline unsigned int _tau_step(unsigned int* state) nogil:
    cdef unsigned int b
    b = (((state[0] << 13) ^ state[0]) >> 19)
    state[0] = (((state[0] & 4294967294u) << 12) ^ b)
    b = (((state[1] << 2) ^ state[1]) >> 25)
    state[1] = (((state[1] & 4294967288u) << 4) ^ b)
    b = (((state[2] << 3) ^ state[2]) >> 11)
    state[2] = (((state[2] & 4294967280u) << 17) ^ b)
    return state[0] ^ state[1] ^ state[2]


def umap_layout_epochs(
    double[:, ::1] emb,
    long long[::1] head,
    long long[::1] tail,
    int n_epochs,
    double[::1] epochs_per_sample,
    double a,
    double b,
    double gamma,
    double initial_alpha,
    int negative_sample_rate,
    rng_state,
):
    """See priopipe._kernels.pure.umap_layout_epochs."""
    cdef Py_ssize_t n_vertices = emb.shape[0]
    cdef Py_ssize_t dim = emb.shape[1]
    cdef Py_ssize_t n_edges = head.shape[0]
    cdef Py_ssize_t i, d, p
    cdef long long j, k
    cdef int n, n_neg_samples
    cdef double dist_squared, grad_coeff, grad_d, diff, alpha

    eons_arr = np.asarray(epochs_per_sample).copy()
    epns_arr = np.asarray(epochs_per_sample) / negative_sample_rate
    eonns_arr = epns_arr.copy()
    cdef double[::1] epoch_of_next_sample = eons_arr
    cdef double[::1] epochs_per_negative_sample = epns_arr
    cdef double[::1] epoch_of_next_negative_sample = eonns_arr

    cdef unsigned int state[3]
    state[0] = <unsigned int> int(rng_state[0])
    state[1] = <unsigned int> int(rng_state[1])
    state[2] = <unsigned int> int(rng_state[2])

    alpha = initial_alpha
    with nogil:
        for n in range(n_epochs):
            for i in range(n_edges):
                if epoch_of_next_sample[i] > n:
                    continue
                j = head[i]
                k = tail[i]

                dist_squared = 0.0
                for d in range(dim):
                    diff = emb[j, d] - emb[k, d]
                    dist_squared += diff * diff
                if dist_squared > 0.0:
                    grad_coeff = -2.0 * a * b * pow(dist_squared, b - 1.0)
                    grad_coeff /= a * pow(dist_squared, b) + 1.0
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

                epoch_of_next_sample[i] += epochs_per_sample[i]

                n_neg_samples = <int> (
                    (n - epoch_of_next_negative_sample[i])
                    / epochs_per_negative_sample[i]
                )
                for p in range(n_neg_samples):
                    k = <long long> (_tau_step(state) % <unsigned int> n_vertices)
                    dist_squared = 0.0
                    for d in range(dim):
                        diff = emb[j, d] - emb[k, d]
                        dist_squared += diff * diff
                    if dist_squared > 0.0:
                        grad_coeff = 2.0 * gamma * b
                        grad_coeff /= (0.001 + dist_squared) * (
                            a * pow(dist_squared, b) + 1.0
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
            alpha = initial_alpha * (1.0 - <double> n / <double> n_epochs)

    rng_state[0] = state[0]
    rng_state[1] = state[1]
    rng_state[2] = state[2]


def scan_split_gini(double[:, ::1] values, long long[:, ::1] labels, int n_classes):
    """See priopipe._kernels.pure.scan_split_gini."""
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t f = values.shape[1]
    cdef Py_ssize_t col, r
    cdef int c, cls
    cdef long long sl, sr, sq_total
    cdef long long n_l, n_r
    cdef double cost, best_cost
    cdef Py_ssize_t best_col = -1, best_row = -1

    cnt_total_arr = np.zeros(n_classes, dtype=np.int64)
    cnt_l_arr = np.zeros(n_classes, dtype=np.int64)
    cnt_r_arr = np.zeros(n_classes, dtype=np.int64)
    cdef long long[::1] cnt_total = cnt_total_arr
    cdef long long[::1] cnt_l = cnt_l_arr
    cdef long long[::1] cnt_r = cnt_r_arr

    best_cost = INFINITY
    with nogil:
        for r in range(m):
            cnt_total[<int> labels[r, 0]] += 1
        sq_total = 0
        for c in range(n_classes):
            sq_total += cnt_total[c] * cnt_total[c]

        for col in range(f):
            for c in range(n_classes):
                cnt_l[c] = 0
                cnt_r[c] = cnt_total[c]
            sl = 0
            sr = sq_total
            for r in range(1, m):
                cls = <int> labels[r - 1, col]
                sl += 2 * cnt_l[cls] + 1
                cnt_l[cls] += 1
                sr -= 2 * cnt_r[cls] - 1
                cnt_r[cls] -= 1
                if values[r, col] > values[r - 1, col]:
                    n_l = r
                    n_r = m - r
                    cost = (
                        (n_l - <double> sl / <double> n_l)
                        + (n_r - <double> sr / <double> n_r)
                    ) / m
                    if cost < best_cost:
                        best_cost = cost
                        best_col = col
                        best_row = r
    return best_col, best_row, best_cost


def scan_split_mse(double[:, ::1] values, double[:, ::1] grads):
    """See priopipe._kernels.pure.scan_split_mse."""
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t f = values.shape[1]
    cdef Py_ssize_t col, r
    cdef double total, s_l, s_r, cost, best_cost
    cdef long long n_l, n_r
    cdef Py_ssize_t best_col = -1, best_row = -1

    best_cost = INFINITY
    with nogil:
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
