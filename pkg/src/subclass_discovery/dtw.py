"""Exact dependent DTW for one- and two-channel series.

Local cost is the squared Euclidean distance across channels, so a single
warping path is shared by all channels. Reported distances are the square
root of the minimal accumulated cost.
"""

from __future__ import annotations

from typing import Sequence

import numba as nb
import numpy as np

from .ts_core import as_multichannel

__all__ = [
    "dtw_distance",
    "dtw_path",
    "pairwise_matrix",
    "cross_matrix",
    "stack_dataset",
]

_NO_BAND = -1


@nb.njit(cache=True)
def _local_cost(a, b, i, j):
    acc = 0.0
    for c in range(a.shape[1]):
        d = a[i, c] - b[j, c]
        acc += d * d
    return acc


@nb.njit(cache=True)
def _dtw_sq(a, b, band):
    """Accumulated cost with two rolling rows."""
    n, m = a.shape[0], b.shape[0]
    prev = np.full(m, np.inf)
    cur = np.full(m, np.inf)
    for i in range(n):
        lo, hi = 0, m - 1
        if band >= 0:
            lo = max(0, i - band)
            hi = min(m - 1, i + band)
        for j in range(m):
            cur[j] = np.inf
        for j in range(lo, hi + 1):
            cost = _local_cost(a, b, i, j)
            if i == 0 and j == 0:
                cur[j] = cost
                continue
            best = np.inf
            if i > 0:
                best = prev[j]
                if j > 0 and prev[j - 1] < best:
                    best = prev[j - 1]
            if j > 0 and cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = cost + best
        prev, cur = cur, prev
    return prev[m - 1]


@nb.njit(cache=True)
def _dtw_matrix(a, b, band):
    n, m = a.shape[0], b.shape[0]
    acc = np.full((n, m), np.inf)
    for i in range(n):
        lo, hi = 0, m - 1
        if band >= 0:
            lo = max(0, i - band)
            hi = min(m - 1, i + band)
        for j in range(lo, hi + 1):
            cost = _local_cost(a, b, i, j)
            if i == 0 and j == 0:
                acc[i, j] = cost
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
            if i > 0 and acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if j > 0 and acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost + best
    return acc


@nb.njit(cache=True)
def _backtrace(acc):
    """Optimal path from the accumulated-cost matrix; diagonal wins ties."""
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    steps = np.empty((acc.shape[0] + acc.shape[1] - 1, 2), dtype=np.int64)
    k = 0
    steps[k, 0], steps[k, 1] = i, j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        k += 1
        steps[k, 0], steps[k, 1] = i, j
    return steps[: k + 1][::-1].copy()


@nb.njit(cache=True)
def _pairwise_sq(data, band):
    n = data.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = _dtw_sq(data[i], data[j], band)
            out[i, j] = d
            out[j, i] = d
    return out


@nb.njit(cache=True)
def _cross_sq(x, y, band):
    out = np.empty((x.shape[0], y.shape[0]))
    for i in range(x.shape[0]):
        for j in range(y.shape[0]):
            out[i, j] = _dtw_sq(x[i], y[j], band)
    return out


def _check_pair(a, b, band):
    a = as_multichannel(a)
    b = as_multichannel(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"channel count mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    return a, b, _band_value(band, a.shape[0], b.shape[0])


def _band_value(band, n, m) -> int:
    if band is None:
        return _NO_BAND
    band = int(band)
    if band < abs(n - m):
        raise ValueError(
            f"band {band} admits no warping path for lengths {n} and {m}"
        )
    return band


def dtw_distance(a, b, band: int | None = None) -> float:
    """DTW distance between two series with the same channel count.

    ``band`` is an optional Sakoe-Chiba radius: cell ``(i, j)`` is admissible
    iff ``|i - j| <= band``.
    """
    a, b, band = _check_pair(a, b, band)
    return float(np.sqrt(_dtw_sq(a, b, band)))


def dtw_path(a, b, band: int | None = None) -> tuple[float, list[tuple[int, int]]]:
    """DTW distance and the optimal warping path as ``(i, j)`` index pairs."""
    a, b, band = _check_pair(a, b, band)
    acc = _dtw_matrix(a, b, band)
    steps = _backtrace(acc)
    return float(np.sqrt(acc[-1, -1])), [(int(i), int(j)) for i, j in steps]


def stack_dataset(group: Sequence) -> np.ndarray:
    """Stack equal-length series into an ``(n, length, channels)`` array."""
    if len(group) == 0:
        raise ValueError("group must not be empty")
    if isinstance(group, np.ndarray) and group.ndim == 3:
        data = np.ascontiguousarray(group, dtype=np.float64)
        if data.shape[2] not in (1, 2):
            raise ValueError(f"channel count must be 1 or 2, got {data.shape[2]}")
        return data
    items = [as_multichannel(s) for s in group]
    shapes = {s.shape for s in items}
    if len({s[1] for s in shapes}) != 1:
        raise ValueError("series in a group must share one channel count")
    if len(shapes) != 1:
        raise ValueError("series in a group must share one length")
    return np.ascontiguousarray(np.stack(items))


def pairwise_matrix(group: Sequence, band: int | None = None) -> np.ndarray:
    """Symmetric matrix of DTW distances with a zero diagonal.

    Series of unequal length are supported but fall back to a Python loop.
    """
    if len(group) == 0:
        raise ValueError("group must not be empty")
    try:
        data = stack_dataset(group)
    except ValueError as exc:
        if "length" not in str(exc):
            raise
        n = len(group)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = dtw_distance(group[i], group[j], band)
        return out
    band = _band_value(band, data.shape[1], data.shape[1])
    return np.sqrt(_pairwise_sq(data, band))


def cross_matrix(x: Sequence, y: Sequence, band: int | None = None,
                 squared: bool = False) -> np.ndarray:
    """DTW distances between every series of ``x`` and every series of ``y``."""
    x = stack_dataset(x)
    y = stack_dataset(y)
    if x.shape[2] != y.shape[2]:
        raise ValueError(f"channel count mismatch: {x.shape[2]} vs {y.shape[2]}")
    band = _band_value(band, x.shape[1], y.shape[1])
    sq = _cross_sq(x, y, band)
    return sq if squared else np.sqrt(sq)
