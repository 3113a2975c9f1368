"""Small dense linear-algebra helpers over GF(2)."""

from __future__ import annotations

import numpy as np


def row_reduce(mat: np.ndarray, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of a binary matrix.

    Args:
        mat: Boolean or 0/1 integer matrix of shape (rows, cols).
        ncols: Only pivot on the first ``ncols`` columns (default: all).

    Returns:
        The reduced matrix (as uint8) and the list of pivot columns.
    """
    a = np.array(mat, dtype=np.uint8) & 1
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols if ncols is None else ncols):
        if r == rows:
            break
        hits = np.nonzero(a[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(mat: np.ndarray) -> int:
    """Rank of a binary matrix over GF(2)."""
    if np.size(mat) == 0:
        return 0
    return len(row_reduce(mat)[1])


def left_nullspace(mat: np.ndarray) -> np.ndarray:
    """Basis of {c : c @ mat = 0 mod 2}, one basis vector per row.

    Args:
        mat: Binary matrix of shape (m, n).

    Returns:
        Array of shape (k, m) whose rows span the left null space.
    """
    mat = np.asarray(mat, dtype=np.uint8) & 1
    m, n = mat.shape
    # Row-reduce [mat | I]; rows whose left block vanishes record the combination.
    aug = np.concatenate([mat, np.eye(m, dtype=np.uint8)], axis=1)
    red, pivots = row_reduce(aug, n)
    return red[len(pivots):, n:].copy()


def all_coefficients(k: int) -> np.ndarray:
    """All 2^k binary coefficient vectors; row ``j`` holds the bits of ``j`` (LSB first)."""
    idx = np.arange(2**k)
    return ((idx[:, None] >> np.arange(k)[None, :]) & 1).astype(np.uint8)
