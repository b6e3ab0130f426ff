"""Kernel backend selection.

The compiled extension is preferred; the pure-Python mirror is used when it
is missing or when PRIOPIPE_PURE is set to a non-empty value other than 0.
Both backends are bit-identical, so the choice only affects speed.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("PRIOPIPE_PURE", "") not in ("", "0"):
    from priopipe._kernels import pure as _impl
else:
    try:
        from priopipe._kernels import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from priopipe._kernels import pure as _impl

BACKEND: str = _impl.BACKEND
umap_layout_epochs = _impl.umap_layout_epochs
scan_split_gini = _impl.scan_split_gini
scan_split_mse = _impl.scan_split_mse


def seed_rng_state(seed: int) -> np.ndarray:
    """Derive a 3-word Tausworthe state from a seed (splitmix-style mixing).

    Low bits are forced non-degenerate as the generator requires.
    """
    state = np.zeros(3, dtype=np.uint64)
    s = seed & 0xFFFFFFFFFFFFFFFF
    for i in range(3):
        s = (s * 6364136223846793005 + 1442695040888963407) & 0xFFFFFFFFFFFFFFFF
        state[i] = ((s >> 32) | 0x20) & 0xFFFFFFFF
    return state


def load_backend(name: str):
    """Return a specific backend module ('pure' or 'compiled'), for benchmarks."""
    if name == "pure":
        from priopipe._kernels import pure

        return pure
    if name == "compiled":
        from priopipe._kernels import _speedups  # type: ignore[attr-defined]

        return _speedups
    raise ValueError(f"unknown backend {name!r}")
