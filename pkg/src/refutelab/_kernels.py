"""Hot numeric kernels.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
version.  The numba path is used when numba imports cleanly and the
environment variable ``REFUTELAB_DISABLE_NUMBA`` is unset (or "0").
Both paths do integer arithmetic internally and must agree bit for bit;
``tests/test_kernels.py`` checks that.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE_FLAG = "REFUTELAB_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_DISABLE_FLAG, "0").strip().lower() in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def encode_points_numpy(points: np.ndarray) -> np.ndarray:
    """Map +-1 points of shape (..., n) to integer codes; bit j set iff x_j = -1."""
    n = points.shape[-1]
    weights = np.left_shift(np.int64(1), np.arange(n, dtype=np.int64))
    return (points < 0).astype(np.int64) @ weights


def max_correlation_numpy(table: np.ndarray, codes: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample maximum over concepts of sum_j label_j * c(x_j).

    table: (C, 2**n) int8, codes: (B, m) int64, labels: (B, m) int8.
    Returns int64 sums of shape (B,); divide by m for correlations.
    """
    out = np.empty(codes.shape[0], dtype=np.int64)
    # chunk over samples to bound the (C, chunk, m) temporary
    chunk = max(1, 4_000_000 // max(1, table.shape[0] * codes.shape[1]))
    lab = labels.astype(np.int64)
    for start in range(0, codes.shape[0], chunk):
        stop = start + chunk
        vals = table[:, codes[start:stop]].astype(np.int64)
        out[start:stop] = (vals * lab[start:stop]).sum(axis=2).max(axis=0)
    return out


def agreement_numpy(table: np.ndarray, codes: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """sum_j label_j * c(x_j) for every concept c; codes (N,), labels (N,)."""
    return table[:, codes].astype(np.int64) @ labels.astype(np.int64)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

try:
    from numba import njit

    @njit(cache=True)
    def encode_points_numba(points):
        flat = points.reshape(-1, points.shape[-1])
        out = np.empty(flat.shape[0], dtype=np.int64)
        for r in range(flat.shape[0]):
            code = 0
            for j in range(flat.shape[1]):
                if flat[r, j] < 0:
                    code |= np.int64(1) << j
            out[r] = code
        return out

    @njit(cache=True)
    def max_correlation_numba(table, codes, labels):
        n_samples, m = codes.shape
        n_concepts = table.shape[0]
        out = np.empty(n_samples, dtype=np.int64)
        for b in range(n_samples):
            best = -m - 1
            for c in range(n_concepts):
                acc = 0
                for j in range(m):
                    acc += table[c, codes[b, j]] * labels[b, j]
                if acc > best:
                    best = acc
            out[b] = best
        return out

    @njit(cache=True)
    def agreement_numba(table, codes, labels):
        n_concepts = table.shape[0]
        out = np.zeros(n_concepts, dtype=np.int64)
        for c in range(n_concepts):
            acc = 0
            for j in range(codes.shape[0]):
                acc += table[c, codes[j]] * labels[j]
            out[c] = acc
        return out

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()


def encode_points(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points)
    lead = points.shape[:-1]
    if USE_NUMBA:
        flat = encode_points_numba(np.ascontiguousarray(points, dtype=np.int8))
    else:
        flat = encode_points_numpy(points).reshape(-1)
    return flat.reshape(lead)


def max_correlation(table: np.ndarray, codes: np.ndarray, labels: np.ndarray) -> np.ndarray:
    if USE_NUMBA:
        return max_correlation_numba(
            np.ascontiguousarray(table, dtype=np.int8),
            np.ascontiguousarray(codes, dtype=np.int64),
            np.ascontiguousarray(labels, dtype=np.int8),
        )
    return max_correlation_numpy(table, codes, labels)


def agreement(table: np.ndarray, codes: np.ndarray, labels: np.ndarray) -> np.ndarray:
    if USE_NUMBA:
        return agreement_numba(
            np.ascontiguousarray(table, dtype=np.int8),
            np.ascontiguousarray(codes, dtype=np.int64),
            np.ascontiguousarray(labels, dtype=np.int8),
        )
    return agreement_numpy(table, codes, labels)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
