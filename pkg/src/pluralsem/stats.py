"""Correlation helpers shared by the feature, evaluation, and study modules.

Convention used throughout: a Pearson correlation involving a zero-variance
vector is 0, never NaN. All outputs are clipped to [-1, 1] to absorb float
round-off.
"""

from __future__ import annotations

import numpy as np

from .errors import LengthMismatch


def pearson(x, y) -> float:
    """Correlation of two equal-length 1-d arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} and {y.shape}")
    xc = x - x.mean()
    yc = y - y.mean()
    nx = np.sqrt(xc @ xc)
    ny = np.sqrt(yc @ yc)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(np.clip((xc @ yc) / (nx * ny), -1.0, 1.0))


def _center_rows(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centered = m - m.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered * centered).sum(axis=1))
    return centered, norms


def pearson_rows(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Correlation of each row of m with the vector v."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.shape[1] != v.shape[0]:
        raise LengthMismatch(f"{m.shape[1]} columns vs vector of {v.shape[0]}")
    mc, mn = _center_rows(m)
    vc = v - v.mean()
    vn = np.sqrt(vc @ vc)
    if vn == 0.0:
        return np.zeros(m.shape[0])
    safe = np.where(mn == 0.0, 1.0, mn)
    r = (mc @ vc) / (safe * vn)
    r[mn == 0.0] = 0.0
    return np.clip(r, -1.0, 1.0)


def pearson_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Correlations of every row of a with every row of b, shape (a, b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise LengthMismatch(f"{a.shape[1]} vs {b.shape[1]} columns")
    ac, an = _center_rows(a)
    bc, bn = _center_rows(b)
    safe_a = np.where(an == 0.0, 1.0, an)
    safe_b = np.where(bn == 0.0, 1.0, bn)
    r = (ac / safe_a[:, None]) @ (bc / safe_b[:, None]).T
    r[an == 0.0, :] = 0.0
    r[:, bn == 0.0] = 0.0
    return np.clip(r, -1.0, 1.0)
