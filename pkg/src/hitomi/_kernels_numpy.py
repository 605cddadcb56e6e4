"""Pure-numpy implementations of the hot kernels.

Reference backend: always available, used when numba is missing or when
HITOMI_NUMBA=0.  Each function here must produce output identical to its
numba twin in ``_kernels_numba``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def forward_logits(x, w1, b1, w2, b2, w3, b3):
    """Batched 3-layer dense forward: relu, relu, identity."""
    h1 = x @ w1.T + b1
    np.maximum(h1, 0.0, out=h1)
    h2 = h1 @ w2.T + b2
    np.maximum(h2, 0.0, out=h2)
    return h2 @ w3.T + b3


def argmax_category(logits, is_clothing):
    """Row argmax (lowest index wins ties) and its clothing flag."""
    winners = np.argmax(logits, axis=1).astype(np.int32)
    return winners, is_clothing[winners]


def dilate(mask, k):
    # Square kernel; pixels outside the frame count as background.
    r = k // 2
    if r == 0:
        return mask.copy()
    padded = np.pad(mask, r, constant_values=False)
    return sliding_window_view(padded, (k, k)).any(axis=(2, 3))


def erode(mask, k):
    # Pixels outside the frame count as foreground, so closing never
    # bites into regions that touch the border.
    r = k // 2
    if r == 0:
        return mask.copy()
    padded = np.pad(mask, r, constant_values=True)
    return sliding_window_view(padded, (k, k)).all(axis=(2, 3))


def label_components(mask, connectivity):
    """Label connected true pixels; labels ordered by first row-major pixel.

    Returns (labels, count) where labels is int32 with -1 for background.
    Implemented as iterative min-index propagation, so each component ends
    up keyed by its smallest flat index before compaction.
    """
    h, w = mask.shape
    sentinel = h * w
    lab = np.where(mask, np.arange(sentinel, dtype=np.int64).reshape(h, w), sentinel)
    if connectivity == 8:
        offsets = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        offsets = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    while True:
        best = lab.copy()
        for dy, dx in offsets:
            shifted = np.full_like(lab, sentinel)
            ys = slice(max(dy, 0), h + min(dy, 0))
            yd = slice(max(-dy, 0), h + min(-dy, 0))
            xs = slice(max(dx, 0), w + min(dx, 0))
            xd = slice(max(-dx, 0), w + min(-dx, 0))
            shifted[yd, xd] = lab[ys, xs]
            np.minimum(best, shifted, out=best)
        best[~mask] = sentinel
        if np.array_equal(best, lab):
            break
        lab = best
    labels = np.full((h, w), -1, dtype=np.int32)
    keys = lab[mask]
    if keys.size:
        roots = np.unique(keys)
        labels[mask] = np.searchsorted(roots, keys).astype(np.int32)
        return labels, int(roots.size)
    return labels, 0
