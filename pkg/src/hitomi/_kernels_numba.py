"""numba-compiled twins of the hot kernels in ``_kernels_numpy``.

Importing this module requires numba; ``kernels`` falls back to the numpy
backend when the import fails.  HITOMI_THREADS caps the worker count used
by the parallel kernels (0 or unset = numba's default).
"""

from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange

_threads = int(os.environ.get("HITOMI_THREADS", "0") or 0)
if _threads > 0:
    numba.set_num_threads(min(_threads, numba.config.NUMBA_NUM_THREADS))


@njit(parallel=True, cache=True)
def forward_logits(x, w1, b1, w2, b2, w3, b3):
    n, d0 = x.shape
    d1 = w1.shape[0]
    d2 = w2.shape[0]
    c = w3.shape[0]
    out = np.empty((n, c), np.float64)
    for i in prange(n):
        h1 = np.empty(d1, np.float64)
        for j in range(d1):
            s = b1[j]
            for k in range(d0):
                s += w1[j, k] * x[i, k]
            h1[j] = s if s > 0.0 else 0.0
        h2 = np.empty(d2, np.float64)
        for j in range(d2):
            s = b2[j]
            for k in range(d1):
                s += w2[j, k] * h1[k]
            h2[j] = s if s > 0.0 else 0.0
        for j in range(c):
            s = b3[j]
            for k in range(d2):
                s += w3[j, k] * h2[k]
            out[i, j] = s
    return out


@njit(parallel=True, cache=True)
def argmax_category(logits, is_clothing):
    n, c = logits.shape
    winners = np.empty(n, np.int32)
    cat = np.empty(n, np.bool_)
    for i in prange(n):
        best = 0
        for j in range(1, c):
            if logits[i, j] > logits[i, best]:  # strict: lowest index wins ties
                best = j
        winners[i] = best
        cat[i] = is_clothing[best]
    return winners, cat


@njit(cache=True)
def dilate(mask, k):
    h, w = mask.shape
    r = k // 2
    out = np.zeros((h, w), np.bool_)
    for i in range(h):
        for j in range(w):
            hit = False
            for di in range(-r, r + 1):
                ii = i + di
                if ii < 0 or ii >= h:
                    continue
                for dj in range(-r, r + 1):
                    jj = j + dj
                    if 0 <= jj < w and mask[ii, jj]:
                        hit = True
                        break
                if hit:
                    break
            out[i, j] = hit
    return out


@njit(cache=True)
def erode(mask, k):
    # Out-of-frame neighbors count as foreground (see numpy twin).
    h, w = mask.shape
    r = k // 2
    out = np.zeros((h, w), np.bool_)
    for i in range(h):
        for j in range(w):
            keep = True
            for di in range(-r, r + 1):
                ii = i + di
                if ii < 0 or ii >= h:
                    continue
                for dj in range(-r, r + 1):
                    jj = j + dj
                    if 0 <= jj < w and not mask[ii, jj]:
                        keep = False
                        break
                if not keep:
                    break
            out[i, j] = keep
    return out


@njit(cache=True)
def label_components(mask, connectivity):
    h, w = mask.shape
    labels = np.full((h, w), -1, np.int32)
    stack = np.empty(h * w, np.int64)
    count = 0
    for start in range(h * w):
        sr = start // w
        sc = start % w
        if not mask[sr, sc] or labels[sr, sc] >= 0:
            continue
        labels[sr, sc] = count
        stack[0] = start
        top = 1
        while top > 0:
            top -= 1
            p = stack[top]
            pr = p // w
            pc = p % w
            for dr in range(-1, 2):
                nr = pr + dr
                if nr < 0 or nr >= h:
                    continue
                for dc in range(-1, 2):
                    if dr == 0 and dc == 0:
                        continue
                    if connectivity == 4 and dr != 0 and dc != 0:
                        continue
                    nc = pc + dc
                    if nc < 0 or nc >= w:
                        continue
                    if mask[nr, nc] and labels[nr, nc] < 0:
                        labels[nr, nc] = count
                        stack[top] = nr * w + nc
                        top += 1
        count += 1
    return labels, count
