"""Compiled per-row GLCM entropy kernels.

Both kernels fill output rows ``[r0, r1)`` of ``out`` from an image that
has already been replicate-padded by ``window // 2``. They share no code:
the naive kernel is the reference the incremental one is tested against.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def naive_rows(padded, out, r0, r1, g, window, dr, dc, symmetric, counts):
    """Rebuild the full GLCM for every pixel and scan all g*g cells."""
    width = out.shape[1]
    i_lo = max(0, -dr)
    i_hi = window - max(0, dr)
    j_lo = max(0, -dc)
    j_hi = window - max(0, dc)
    for r in range(r0, r1):
        for c in range(width):
            for a in range(g):
                for b in range(g):
                    counts[a, b] = 0
            total = 0
            for i in range(r + i_lo, r + i_hi):
                for j in range(c + j_lo, c + j_hi):
                    a = padded[i, j]
                    b = padded[i + dr, j + dc]
                    counts[a, b] += 1
                    total += 1
                    if symmetric:
                        counts[b, a] += 1
                        total += 1
            h = 0.0
            for a in range(g):
                for b in range(g):
                    n = counts[a, b]
                    if n > 0:
                        p = n / total
                        h -= p * math.log(p)
            out[r, c] = h


@numba.njit(cache=True, nogil=True, inline="always")
def _pair(cells, a, b, delta, g, symmetric, s, tables):
    # Symmetric GLCMs keep one cell per unordered pair: an off-diagonal pair
    # with n occurrences stands for two matrix cells of count n, a diagonal
    # one for a single cell of count 2n. ``tables[1]`` / ``tables[0]`` hold
    # the matching c*log(c) contributions. Written without data-dependent
    # branches; random levels make them mispredict constantly.
    if symmetric:
        lo = min(a, b)
        hi = max(a, b)
    else:
        lo = a
        hi = b
    k = lo * g + hi
    n = cells[k]
    m = n + delta
    cells[k] = m
    d = np.int64(a == b)
    return s + (tables[d, m] - tables[d, n])


@numba.njit(cache=True, nogil=True)
def window_add(padded, cells, r, c, g, window, dr, dc, symmetric, delta, s, tables):
    """Add (delta=1) or remove (delta=-1) every pair of the window at (r, c)."""
    for i in range(r + max(0, -dr), r + window - max(0, dr)):
        for j in range(c + max(0, -dc), c + window - max(0, dc)):
            s = _pair(cells, padded[i, j], padded[i + dr, j + dc], delta, g, symmetric, s,
                      tables)
    return s


@numba.njit(cache=True, nogil=True)
def window_slide(padded, cells, r, c, g, window, dr, dc, symmetric, s, tables):
    """Move the window at (r, c) to (r, c + 1); only O(window) pairs change."""
    j_out = c + max(0, -dc)
    j_in = c + window - max(0, dc)
    for i in range(r + max(0, -dr), r + window - max(0, dr)):
        s = _pair(cells, padded[i, j_out], padded[i + dr, j_out + dc], -1, g, symmetric, s,
                  tables)
        s = _pair(cells, padded[i, j_in], padded[i + dr, j_in + dc], 1, g, symmetric, s,
                  tables)
    return s


@numba.njit(cache=True, nogil=True)
def incremental_rows(padded, out, r0, r1, g, window, dr, dc, symmetric, cells, tables):
    """Slide the window one column at a time, touching only entering/leaving pairs.

    Keeps ``s = sum(c * log c)`` over GLCM cells so that entropy is
    ``log(T) - s / T``. Counts and ``s`` are rebuilt at the start of each row.
    """
    width = out.shape[1]
    total = (window - abs(dr)) * (window - abs(dc)) * (2 if symmetric else 1)
    log_total = math.log(total)
    for r in range(r0, r1):
        s = window_add(padded, cells, r, 0, g, window, dr, dc, symmetric, 1, 0.0, tables)
        out[r, 0] = log_total - s / total
        for c in range(1, width):
            s = window_slide(padded, cells, r, c - 1, g, window, dr, dc, symmetric, s,
                             tables)
            out[r, c] = log_total - s / total
        window_add(padded, cells, r, width - 1, g, window, dr, dc, symmetric, -1, s,
                   tables)


def cell_tables(total, symmetric):
    """Rows (off-diagonal, diagonal) of c*log(c) indexed by stored cell count."""
    t = xlogx_table(2 * total)[: total + 1]
    if not symmetric:
        return np.stack([t, t])
    n = np.arange(total + 1)
    return np.stack([2.0 * t, xlogx_table(2 * total)[2 * n]])


def expand_cells(cells, g, symmetric):
    """Full g x g count matrix from the compact cell buffer."""
    half = cells.reshape(g, g)
    if not symmetric:
        return half.copy()
    full = half + half.T
    return full


def xlogx_table(n):
    k = np.arange(n + 1, dtype=np.float64)
    t = np.zeros(n + 1)
    t[1:] = k[1:] * np.log(k[1:])
    return t
