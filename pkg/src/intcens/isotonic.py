"""Pool-adjacent-violators and greatest convex minorant kernels.

Every estimator in the package reduces to (repeated) weighted isotonic
regression.  The convex-minorant view and the PAVA view are the same
computation: the left slopes of the greatest convex minorant of the cusum
diagram ``(W_i, S_i)`` are the weighted isotonic regression of the slopes
``(S_i - S_{i-1}) / (W_i - W_{i-1})`` with weights ``W_i - W_{i-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True)
def _pava_kernel(y, w):
    n = y.shape[0]
    # block level, weight and end index; blocks live on a stack
    level = np.empty(n)
    weight = np.empty(n)
    end = np.empty(n, dtype=np.int64)
    top = -1
    for i in range(n):
        top += 1
        level[top] = y[i]
        weight[top] = w[i]
        end[top] = i
        while top > 0 and level[top - 1] >= level[top]:
            wt = weight[top - 1] + weight[top]
            level[top - 1] = (weight[top - 1] * level[top - 1] + weight[top] * level[top]) / wt
            weight[top - 1] = wt
            end[top - 1] = end[top]
            top -= 1
    out = np.empty(n)
    start = 0
    for b in range(top + 1):
        for i in range(start, end[b] + 1):
            out[i] = level[b]
        start = end[b] + 1
    return out


def pava(values, weights=None) -> np.ndarray:
    """Weighted least-squares projection onto nondecreasing sequences.

    Parameters
    ----------
    values : array-like of shape (n,)
    weights : array-like of shape (n,), optional
        Strictly positive weights; unit weights when omitted.

    Returns
    -------
    fit : ndarray of shape (n,)
        Minimizer of ``sum(w * (fit - values)**2)`` subject to
        ``fit[0] <= fit[1] <= ... <= fit[n-1]``.  Every index of a pooled
        block receives the weighted block mean.
    """
    y = np.ascontiguousarray(values, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("pava needs a non-empty one-dimensional input")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.ascontiguousarray(weights, dtype=float)
        if w.shape != y.shape:
            raise ValueError("values and weights must have equal lengths")
        if not np.all(w > 0):
            raise ValueError("weights must be strictly positive")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
        raise ValueError("pava input must be finite")
    return _pava_kernel(y, w)


@dataclass(frozen=True)
class CusumDiagram:
    """Points ``(x_i, y_i)``, i = 0..K, starting at the origin with x strictly increasing."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("cusum coordinates must be equal-length vectors")
        if x.size < 2:
            raise ValueError("cusum diagram needs at least one point besides the origin")
        if x[0] != 0.0 or y[0] != 0.0:
            raise ValueError("cusum diagram must start at the origin")
        if not np.all(np.diff(x) > 0):
            raise ValueError("cusum x-coordinates must be strictly increasing")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_increments(cls, dy, dx=None) -> "CusumDiagram":
        dy = np.asarray(dy, dtype=float)
        dx = np.ones_like(dy) if dx is None else np.asarray(dx, dtype=float)
        x = np.concatenate(([0.0], np.cumsum(dx)))
        y = np.concatenate(([0.0], np.cumsum(dy)))
        return cls(x, y)

    def __len__(self):
        return self.x.size - 1


def gcm_left_slopes(diagram: CusumDiagram) -> np.ndarray:
    """Left derivative of the greatest convex minorant at ``x_1, ..., x_K``.

    Computed as the isotonic regression of the chord slopes, which avoids
    geometric hull tests on floating-point chords.
    """
    dx = np.diff(diagram.x)
    dy = np.diff(diagram.y)
    return _pava_kernel(np.ascontiguousarray(dy / dx), np.ascontiguousarray(dx))


def gcm_vertices(diagram: CusumDiagram) -> np.ndarray:
    """Indices of the diagram points that lie on the greatest convex minorant."""
    slopes = gcm_left_slopes(diagram)
    breaks = np.flatnonzero(slopes[1:] != slopes[:-1]) + 1
    return np.concatenate(([0], breaks, [len(diagram)]))
