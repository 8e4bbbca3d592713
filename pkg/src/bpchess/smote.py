"""SMOTE oversampling: interpolate minority samples with nearest neighbors.

Neighbor search runs in standardized feature space (plain Euclidean after
per-feature scaling) via chunked distance matrices, which keeps memory
bounded on large row counts. Synthetic rows are returned in the original
feature space, tagged so callers can keep them out of evaluation splits.
"""

from __future__ import annotations

import warnings

import numpy as np


class SmoteError(ValueError):
    pass


def _knn_minority(Z: np.ndarray, k: int, chunk: int | None = None) -> np.ndarray:
    """Indices (n, k) of each row's k nearest other rows."""
    n = Z.shape[0]
    if chunk is None:
        # cap the (chunk, n) distance buffer at ~128 MB
        chunk = max(64, min(2048, (1 << 25) // max(n, 1)))
    sq = np.einsum("ij,ij->i", Z, Z)
    out = np.empty((n, k), dtype=np.int64)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d = sq[lo:hi, None] + sq[None, :] - 2.0 * (Z[lo:hi] @ Z.T)
        d[np.arange(lo, hi) - lo, np.arange(lo, hi)] = np.inf
        idx = np.argpartition(d, k, axis=1)[:, :k]
        # order the k winners by distance so results are deterministic
        row = np.arange(hi - lo)[:, None]
        order = np.argsort(d[row, idx], axis=1, kind="stable")
        out[lo:hi] = idx[row, order]
    return out


def smote_balance(X: np.ndarray, y: np.ndarray, k: int = 5, seed: int = 0,
                  release=None):
    """Equalize class counts by synthesizing minority samples.

    Each synthetic point is x_i + u * (x_n - x_i) with u ~ U[0,1] and x_n
    one of x_i's k nearest minority neighbors.

    `release`, if given, is called once X's rows have been copied into the
    balanced matrix; callers can use it to drop their last reference to X
    so only the balanced copy stays live (it is not called when the input
    is already balanced and returned as-is).

    Returns (X_bal, y_bal, synthetic) where `synthetic` marks generated rows.
    """
    y = np.asarray(y)
    X = np.asarray(X, dtype=np.float32)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) != 2:
        raise SmoteError(f"expected 2 classes, got {list(classes)}")
    minority = classes[np.argmin(counts)]
    n_min, n_maj = counts.min(), counts.max()
    if n_min < 2:
        raise SmoteError("minority class must have at least 2 samples")
    need = n_maj - n_min
    if need == 0:
        return X, y, np.zeros(len(y), dtype=bool)
    if k > n_min - 1:
        warnings.warn(f"SMOTE k={k} clamped to {n_min - 1} (minority size {n_min})")
        k = n_min - 1

    n, d = X.shape
    Xm = X[y == minority]
    # copy the originals now, then let go of the (possibly huge) input
    X_bal = np.empty((n + need, d), dtype=np.float32)
    X_bal[:n] = X
    X = None
    if release is not None:
        release()

    mean = Xm.mean(axis=0)
    scale = Xm.std(axis=0)
    scale[scale == 0] = 1.0
    Z = ((Xm - mean) / scale).astype(np.float32)
    nn = _knn_minority(Z, k)

    rng = np.random.default_rng(seed)
    base = rng.integers(0, len(Xm), size=need)
    pick = rng.integers(0, k, size=need)
    u = rng.random(need, dtype=np.float32)
    neighbors = nn[base, pick]

    # fill the synthetic block in place; a separate synth matrix plus a
    # concatenate would double the peak footprint on multi-GB inputs
    for lo in range(0, need, 65536):
        hi = min(lo + 65536, need)
        blk = X_bal[n + lo:n + hi]
        np.subtract(Xm[neighbors[lo:hi]], Xm[base[lo:hi]], out=blk)
        blk *= u[lo:hi, None]
        blk += Xm[base[lo:hi]]
    y_bal = np.concatenate([y, np.full(need, minority, dtype=y.dtype)])
    synthetic = np.zeros(len(y_bal), dtype=bool)
    synthetic[len(y):] = True
    return X_bal, y_bal, synthetic
