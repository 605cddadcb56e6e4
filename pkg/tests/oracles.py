"""Independent reference implementations the tests check against.

Everything here uses the dumbest workable algorithm (explicit loops, set
algebra, exhaustive search) and never calls into the package's kernels,
so agreement is meaningful.
"""

import numpy as np


# --------------------------------------------------------------------------
# Dense forward
# --------------------------------------------------------------------------


def naive_forward(model, x):
    """Explicit triple-loop forward pass over the model's layers."""
    v = [float(t) for t in x]
    for layer in model.layers:
        out = []
        for j in range(layer.out_dim):
            s = float(layer.bias[j])
            for k in range(layer.in_dim):
                s += float(layer.weights[j, k]) * v[k]
            if layer.activation == "relu" and s < 0.0:
                s = 0.0
            out.append(s)
        v = out
    return np.array(v)


# --------------------------------------------------------------------------
# Morphology and connectivity (set algebra / flood fill)
# --------------------------------------------------------------------------


def brute_dilate(mask, k):
    h, w = mask.shape
    r = k // 2
    out = np.zeros_like(mask, dtype=bool)
    for i in range(h):
        for j in range(w):
            hit = False
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    ii, jj = i + di, j + dj
                    if 0 <= ii < h and 0 <= jj < w and mask[ii, jj]:
                        hit = True
            out[i, j] = hit
    return out


def brute_erode(mask, k):
    # Outside the frame counts as foreground, mirroring the pipeline.
    h, w = mask.shape
    r = k // 2
    out = np.zeros_like(mask, dtype=bool)
    for i in range(h):
        for j in range(w):
            keep = True
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    ii, jj = i + di, j + dj
                    if 0 <= ii < h and 0 <= jj < w and not mask[ii, jj]:
                        keep = False
            out[i, j] = keep
    return out


def brute_open(mask, k):
    return brute_dilate(brute_erode(mask, k), k)


def brute_close(mask, k, iterations=1):
    out = mask
    for _ in range(iterations):
        out = brute_dilate(out, k)
    for _ in range(iterations):
        out = brute_erode(out, k)
    return out


def flood_components(mask, connectivity):
    """BFS flood fill; frozensets of (row, col), ordered by first pixel."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    if connectivity == 8:
        offs = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        offs = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    comps = []
    for i in range(h):
        for j in range(w):
            if not mask[i, j] or seen[i, j]:
                continue
            queue = [(i, j)]
            seen[i, j] = True
            pixels = set()
            while queue:
                r, c = queue.pop()
                pixels.add((r, c))
                for dr, dc in offs:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and not seen[rr, cc]:
                        seen[rr, cc] = True
                        queue.append((rr, cc))
            comps.append(frozenset(pixels))
    return comps


def brute_area_filter(mask, connectivity, min_area):
    out = np.zeros_like(mask, dtype=bool)
    for comp in flood_components(mask, connectivity):
        if len(comp) >= min_area:
            for r, c in comp:
                out[r, c] = True
    return out


def brute_denoise(mask, params):
    opened = brute_open(mask, params.open_kernel)
    return brute_area_filter(opened, params.connectivity, params.min_component_area)


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def pixel_iou(a, b):
    """IoU by enumerating the integer pixels each box covers."""
    pa = {(x, y) for x in range(a.x, a.x + a.w) for y in range(a.y, a.y + a.h)}
    pb = {(x, y) for x in range(b.x, b.x + b.w) for y in range(b.y, b.y + b.h)}
    return len(pa & pb) / len(pa | pb)


def max_matching_tp(dets, gts, threshold, iou_fn):
    """Maximum bipartite matching size over IoU >= threshold edges."""
    edges = [[iou_fn(d, g) >= threshold for g in gts] for d in dets]
    owner = [-1] * len(gts)

    def assign(di, visited):
        for gi in range(len(gts)):
            if edges[di][gi] and not visited[gi]:
                visited[gi] = True
                if owner[gi] < 0 or assign(owner[gi], visited):
                    owner[gi] = di
                    return True
        return False

    return sum(assign(di, [False] * len(gts)) for di in range(len(dets)))


def envelope_ap(points):
    """All-points AP: per point, max precision over all points at recall >= r."""
    ap = 0.0
    prev_r = 0.0
    for i, (r, _) in enumerate(points):
        env = max(p for _, p in points[i:])  # recall is non-decreasing
        ap += (r - prev_r) * env
        prev_r = r
    return ap


# --------------------------------------------------------------------------
# Band integration
# --------------------------------------------------------------------------


def quad_band_response(signature, illuminant, center, fwhm, step=0.05, span=6.0):
    """Fine-grid quadrature over a wider support than the implementation."""
    sigma = fwhm / 2.3548
    wl = np.arange(center - span * sigma, center + span * sigma + step / 2, step)
    g = np.exp(-0.5 * ((wl - center) / sigma) ** 2)
    w = illuminant.at(wl) * g
    return float((w * signature.at(wl)).sum() / w.sum())
