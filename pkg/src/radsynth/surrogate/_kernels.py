"""Compiled inner loops for the hot elementwise layers."""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def channel_moments(x2):
    """Per-column mean and population variance with float64 accumulators."""
    n, c = x2.shape
    mean = np.zeros(c)
    for i in range(n):
        for k in range(c):
            mean[k] += x2[i, k]
    mean /= n
    var = np.zeros(c)
    for i in range(n):
        for k in range(c):
            d = x2[i, k] - mean[k]
            var[k] += d * d
    var /= n
    return mean, var


@numba.njit(cache=True, nogil=True)
def maxpool_forward(x, out, idx):
    b, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    for n in range(b):
        for i in range(h2):
            for j in range(w2):
                for k in range(c):
                    best = x[n, 2 * i, 2 * j, k]
                    arg = 0
                    # window order (0,0), (0,1), (1,0), (1,1); strict > keeps the first max
                    v = x[n, 2 * i, 2 * j + 1, k]
                    if v > best:
                        best = v
                        arg = 1
                    v = x[n, 2 * i + 1, 2 * j, k]
                    if v > best:
                        best = v
                        arg = 2
                    v = x[n, 2 * i + 1, 2 * j + 1, k]
                    if v > best:
                        best = v
                        arg = 3
                    out[n, i, j, k] = best
                    idx[n, i, j, k] = arg


@numba.njit(cache=True, nogil=True)
def maxpool_backward(grad, idx, dx):
    b, h2, w2, c = grad.shape
    for n in range(b):
        for i in range(h2):
            for j in range(w2):
                for k in range(c):
                    a = idx[n, i, j, k]
                    dx[n, 2 * i + a // 2, 2 * j + a % 2, k] = grad[n, i, j, k]
