#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-Python mirrors.

Both backends are bit-identical by construction (asserted here on every
case); this script measures the speed gap so the fallback's cost is known.

    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from priopipe import _kernels
from priopipe._kernels import load_backend


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_layout(backends, quick):
    n, dims, edges, epochs = (300, 4, 3000, 20) if quick else (1500, 8, 20000, 50)
    rng = np.random.default_rng(0)
    head = rng.integers(0, n, edges).astype(np.int64)
    tail = rng.integers(0, n, edges).astype(np.int64)
    eps = np.ascontiguousarray(rng.uniform(1.0, 10.0, edges))
    base = np.ascontiguousarray(rng.normal(size=(n, dims)))

    results = {}
    outputs = {}
    for name, backend in backends.items():
        emb = base.copy()
        state = _kernels.seed_rng_state(7)

        def run(emb=emb, state=state, backend=backend):
            backend.umap_layout_epochs(
                emb, head, tail, epochs, eps, 1.577, 0.895, 1.0, 1.0, 5, state
            )

        results[name] = timeit(run, repeats=1)
        outputs[name] = emb
    if len(outputs) == 2:
        a, b = outputs.values()
        assert a.tobytes() == b.tobytes(), "backends diverged"
    return f"layout sgd ({n} pts, {edges} edges, {epochs} epochs)", results


def bench_gini(backends, quick):
    m, f, k = (400, 8, 6) if quick else (4000, 8, 20)
    rng = np.random.default_rng(1)
    base = rng.normal(size=(m, f))
    y = rng.integers(0, k, m).astype(np.int64)
    order = np.argsort(base, axis=0, kind="stable")
    values = np.ascontiguousarray(np.take_along_axis(base, order, axis=0))
    labels = np.ascontiguousarray(y[order])

    results = {}
    outputs = {}
    for name, backend in backends.items():
        results[name] = timeit(lambda b=backend: b.scan_split_gini(values, labels, k))
        outputs[name] = backend.scan_split_gini(values, labels, k)
    if len(outputs) == 2:
        a, b = outputs.values()
        assert a == b, "backends diverged"
    return f"gini split scan ({m} rows x {f} features, {k} classes)", results


def bench_mse(backends, quick):
    m, f = (400, 8) if quick else (4000, 16)
    rng = np.random.default_rng(2)
    base = rng.normal(size=(m, f))
    g = rng.normal(size=m)
    order = np.argsort(base, axis=0, kind="stable")
    values = np.ascontiguousarray(np.take_along_axis(base, order, axis=0))
    grads = np.ascontiguousarray(g[order])

    results = {}
    outputs = {}
    for name, backend in backends.items():
        results[name] = timeit(lambda b=backend: b.scan_split_mse(values, grads))
        outputs[name] = backend.scan_split_mse(values, grads)
    if len(outputs) == 2:
        a, b = outputs.values()
        assert a == b, "backends diverged"
    return f"mse split scan ({m} rows x {f} features)", results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="small problem sizes")
    args = parser.parse_args()

    backends = {"pure": load_backend("pure")}
    try:
        backends["compiled"] = load_backend("compiled")
    except ImportError:
        print("compiled extension not available; benchmarking pure only")

    print(f"active backend at import: {_kernels.BACKEND}\n")
    header = f"{'benchmark':<52} " + " ".join(f"{n:>12}" for n in backends)
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for bench in (bench_layout, bench_gini, bench_mse):
        label, results = bench(backends, args.quick)
        row = f"{label:<52} " + " ".join(f"{results[n]:>11.4f}s" for n in backends)
        if len(results) == 2:
            row += f" {results['pure'] / results['compiled']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
