"""Hot numeric kernels, compiled with numba when available.

Every kernel has two interchangeable implementations: a vectorized
pure-numpy one and a numba ``@njit`` loop version.  The active backend is
picked once, at import time:

* ``SUBLIST_BACKEND=numpy`` forces the pure-numpy fallback,
* ``SUBLIST_BACKEND=numba`` requires numba (raises if it is missing),
* unset or ``auto`` uses numba when importable, numpy otherwise.

Both implementations stay importable through :data:`IMPLEMENTATIONS` so the
parity tests and ``benchmarks/bench_kernels.py`` can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

ENV_BACKEND = "SUBLIST_BACKEND"


def _coverage_subset_values_numpy(
    cover: np.ndarray, weights: np.ndarray, member: np.ndarray
) -> np.ndarray:
    """Reward of each row-subset: ``member`` is (K, m) bool over the m rows
    of ``cover`` (m items x C concepts); returns the K covered-weight sums."""
    n_rows = member.shape[0]
    if n_rows == 0:
        return np.zeros(0, dtype=np.float64)
    if cover.shape[0] == 0:
        return np.zeros(n_rows, dtype=np.float64)
    counts = member.astype(np.float64) @ (cover != 0).astype(np.float64)
    return (counts > 0.0).astype(np.float64) @ weights


def _coverage_union_gains_numpy(
    cover: np.ndarray, covered: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Value of ``covered`` extended by each candidate row of ``cover``."""
    union = (cover != 0) | (covered != 0)
    return union.astype(np.float64) @ weights


def _pairwise_hinge_numpy(
    diffs: np.ndarray, pair_weights: np.ndarray, h: np.ndarray
) -> tuple[float, np.ndarray]:
    """Total weighted hinge loss and its subgradient in ``h``.

    ``diffs`` holds one (better - worse) feature difference per pair; a pair
    is active while its margin ``h @ diff`` is below 1.
    """
    grad = np.zeros_like(h)
    if diffs.shape[0] == 0:
        return 0.0, grad
    slack = 1.0 - diffs @ h
    active = slack > 0.0
    if not active.any():
        return 0.0, grad
    loss = float(pair_weights[active] @ slack[active])
    grad = -(pair_weights[active, None] * diffs[active]).sum(axis=0)
    return loss, grad


_NUMPY_IMPLS = {
    "coverage_subset_values": _coverage_subset_values_numpy,
    "coverage_union_gains": _coverage_union_gains_numpy,
    "pairwise_hinge": _pairwise_hinge_numpy,
}


def _build_numba_impls():
    from numba import njit

    @njit(cache=True)
    def coverage_subset_values(cover, weights, member):  # pragma: no cover - jit
        n_rows, m = member.shape
        n_concepts = cover.shape[1]
        out = np.zeros(n_rows, dtype=np.float64)
        union = np.zeros(n_concepts, dtype=np.uint8)
        for k in range(n_rows):
            for c in range(n_concepts):
                union[c] = 0
            for i in range(m):
                if member[k, i]:
                    for c in range(n_concepts):
                        union[c] |= cover[i, c]
            total = 0.0
            for c in range(n_concepts):
                if union[c]:
                    total += weights[c]
            out[k] = total
        return out

    @njit(cache=True)
    def coverage_union_gains(cover, covered, weights):  # pragma: no cover - jit
        n_items, n_concepts = cover.shape
        base = 0.0
        extra = np.zeros(n_concepts, dtype=np.float64)
        for c in range(n_concepts):
            if covered[c]:
                base += weights[c]
            else:
                extra[c] = weights[c]
        out = np.empty(n_items, dtype=np.float64)
        for i in range(n_items):
            total = base
            for c in range(n_concepts):
                if cover[i, c]:
                    total += extra[c]
            out[i] = total
        return out

    @njit(cache=True)
    def pairwise_hinge(diffs, pair_weights, h):  # pragma: no cover - jit
        n_pairs, dim = diffs.shape
        grad = np.zeros(dim, dtype=np.float64)
        loss = 0.0
        for p in range(n_pairs):
            margin = 0.0
            for d in range(dim):
                margin += h[d] * diffs[p, d]
            slack = 1.0 - margin
            if slack > 0.0:
                loss += pair_weights[p] * slack
                for d in range(dim):
                    grad[d] -= pair_weights[p] * diffs[p, d]
        return loss, grad

    return {
        "coverage_subset_values": coverage_subset_values,
        "coverage_union_gains": coverage_union_gains,
        "pairwise_hinge": pairwise_hinge,
    }


def _select_backend() -> tuple[str, dict]:
    requested = os.environ.get(ENV_BACKEND, "auto").strip().lower() or "auto"
    if requested not in ("auto", "numpy", "numba"):
        raise ValueError(
            f"{ENV_BACKEND} must be 'numpy' or 'numba', got {requested!r}"
        )
    if requested == "numpy":
        return "numpy", _NUMPY_IMPLS
    try:
        impls = _build_numba_impls()
    except ImportError:
        if requested == "numba":
            raise
        return "numpy", _NUMPY_IMPLS
    return "numba", impls


BACKEND, _ACTIVE = _select_backend()

IMPLEMENTATIONS: dict[str, dict | None] = {
    "numpy": _NUMPY_IMPLS,
    "numba": _ACTIVE if BACKEND == "numba" else None,
}

coverage_subset_values = _ACTIVE["coverage_subset_values"]
coverage_union_gains = _ACTIVE["coverage_union_gains"]
pairwise_hinge = _ACTIVE["pairwise_hinge"]


def load_numba_impls() -> dict | None:
    """Compile and return the numba kernels even when the numpy backend is
    active (used by the benchmark); None when numba is not installed."""
    if IMPLEMENTATIONS["numba"] is not None:
        return IMPLEMENTATIONS["numba"]
    try:
        impls = _build_numba_impls()
    except ImportError:
        return None
    IMPLEMENTATIONS["numba"] = impls
    return impls
