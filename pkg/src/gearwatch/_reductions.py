"""Order-stable reductions.

Floating-point addition is not associative, so reported model quantities
would depend on input row order if sums followed it. Every reduction here
runs over a canonical row ordering in fixed-size chunks accumulated in
sequence, which makes fitted parameters invariant under permutation of the
input records and stable across worker counts.
"""

from __future__ import annotations

import numpy as np

CHUNK = 65536


def canonical_order(X: np.ndarray) -> np.ndarray:
    """Indices sorting rows lexicographically by column 0, then 1, ..."""
    return np.lexsort(X.T[::-1])


def chunked_sum(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Sum along axis 0 by accumulating fixed-size chunks in order."""
    if axis != 0:
        raise ValueError("only axis 0 is supported")
    n = values.shape[0]
    total = np.zeros(values.shape[1:], dtype=np.float64)
    for start in range(0, n, CHUNK):
        total += values[start:start + CHUNK].sum(axis=0)
    return total


def chunked_gram(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A.T @ B accumulated chunk by chunk in row order."""
    if A.shape[0] != B.shape[0]:
        raise ValueError("row counts differ")
    total = np.zeros((A.shape[1], B.shape[1]), dtype=np.float64)
    for start in range(0, A.shape[0], CHUNK):
        total += A[start:start + CHUNK].T @ B[start:start + CHUNK]
    return total
