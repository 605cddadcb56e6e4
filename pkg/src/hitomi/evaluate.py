"""Presence-detection evaluation: IoU matching, PR curves, AP, sweeps.

Matching is greedy in confidence-descending order with file order breaking
ties, one ground-truth box per detection, evaluated per frame.  AP uses
all-points interpolation (monotone precision envelope integrated over
recall).  Detection files from other detectors evaluate through exactly
the same path as native output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import DegenerateEval, DomainError
from .formats import DetectionRecord, GroundTruthBox, read_detections


@dataclass
class EvalConfig:
    iou_threshold: float = 0.2
    confidence_floor: float = 0.01
    ap_interpolation: str = "all-points"
    tie_order: str = "file-order"

    def __post_init__(self):
        if not (0.0 < self.iou_threshold <= 1.0):
            raise DomainError("iou_threshold must be in (0, 1]")
        if self.ap_interpolation != "all-points":
            raise DomainError(f"unknown ap_interpolation {self.ap_interpolation!r}")
        if self.tie_order != "file-order":
            raise DomainError(f"unknown tie_order {self.tie_order!r}")


@dataclass
class FrameMatch:
    tp: int
    fp: int
    fn: int
    pairs: list[tuple[int, int]]  # (det index, gt index) within the frame lists


@dataclass
class EvalReport:
    ap: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    pr_points: list[tuple[float, float]]
    per_frame: dict[str, tuple[int, int, int]] = field(default_factory=dict)


@dataclass
class SweepRow:
    threshold: float
    ap: float
    tp: int
    fn: int
    fp: int


def _xywh(box):
    if isinstance(box, (tuple, list)):
        x, y, w, h = box
    else:
        x, y, w, h = box.x, box.y, box.w, box.h
    if w < 1 or h < 1:
        raise DomainError(f"degenerate box {(x, y, w, h)}")
    return float(x), float(y), float(w), float(h)


def iou(a, b) -> float:
    """Intersection over union of two half-open pixel boxes."""
    ax, ay, aw, ah = _xywh(a)
    bx, by, bw, bh = _xywh(b)
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union


def _greedy_order(dets: list[DetectionRecord]) -> list[int]:
    # Stable sort keeps file order within equal confidences.
    return sorted(range(len(dets)), key=lambda i: -dets[i].confidence)


def match_frame(dets: list[DetectionRecord], gts: list[GroundTruthBox], cfg: EvalConfig) -> FrameMatch:
    """Greedy one-to-one matching inside a single frame.

    Callers filter ``dets`` to confidence >= cfg.confidence_floor first.
    Each detection takes the unmatched ground truth of highest IoU (first
    in file order on IoU ties); a match below the IoU threshold is a FP.
    """
    taken = [False] * len(gts)
    pairs = []
    fp = 0
    for di in _greedy_order(dets):
        best_iou = 0.0
        best_gi = -1
        for gi, gt in enumerate(gts):
            if taken[gi]:
                continue
            v = iou(dets[di], gt)
            if v > best_iou:
                best_iou = v
                best_gi = gi
        if best_gi >= 0 and best_iou >= cfg.iou_threshold:
            taken[best_gi] = True
            pairs.append((di, best_gi))
        else:
            fp += 1
    tp = len(pairs)
    return FrameMatch(tp=tp, fp=fp, fn=len(gts) - tp, pairs=pairs)


def _group_by_frame(items):
    grouped: dict[str, list] = {}
    for it in items:
        grouped.setdefault(it.frame_id, []).append(it)
    return grouped


def _cumulative_sweep(dets, gts, cfg):
    """Global confidence-descending sweep; returns per-step flags and points."""
    gts_by_frame = _group_by_frame(gts)
    taken = {fid: [False] * len(g) for fid, g in gts_by_frame.items()}
    n_gt = len(gts)
    points = []
    confidences = []
    tp = fp = 0
    for di in _greedy_order(dets):
        det = dets[di]
        frame_gts = gts_by_frame.get(det.frame_id, [])
        flags = taken.get(det.frame_id, [])
        best_iou = 0.0
        best_gi = -1
        for gi, gt in enumerate(frame_gts):
            if flags[gi]:
                continue
            v = iou(det, gt)
            if v > best_iou:
                best_iou = v
                best_gi = gi
        if best_gi >= 0 and best_iou >= cfg.iou_threshold:
            flags[best_gi] = True
            tp += 1
        else:
            fp += 1
        points.append((tp / n_gt, tp / (tp + fp)))
        confidences.append(det.confidence)
    return points, confidences, tp, fp


def _filter(dets, cfg):
    return [d for d in dets if d.confidence >= cfg.confidence_floor]


def pr_curve(dets, gts, cfg: EvalConfig | None = None) -> list[tuple[float, float]]:
    """(recall, precision) after each detection of the global sweep."""
    cfg = cfg or EvalConfig()
    if len(gts) == 0:
        raise DegenerateEval("precision-recall needs at least one ground-truth box")
    points, _, _, _ = _cumulative_sweep(_filter(dets, cfg), gts, cfg)
    return points


def collapse_pr_for_display(points, confidences) -> list[tuple[float, float]]:
    """Keep only the final point of each same-confidence run.

    A fixed-confidence detector thereby renders as a single point (drawn
    as a horizontal line from recall 0), while AP still integrates the
    full sweep.
    """
    out = []
    for i, pt in enumerate(points):
        if i + 1 == len(points) or confidences[i + 1] != confidences[i]:
            out.append(pt)
    return out


def average_precision(pr_points) -> float:
    """All-points interpolation: integrate the right-to-left precision envelope."""
    if not pr_points:
        return 0.0
    env = [0.0] * len(pr_points)
    running = 0.0
    for i in range(len(pr_points) - 1, -1, -1):
        running = max(running, pr_points[i][1])
        env[i] = running
    ap = 0.0
    prev_r = 0.0
    for (r, _), p in zip(pr_points, env):
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def evaluate(dets, gts, cfg: EvalConfig | None = None) -> EvalReport:
    """Totals, rates, PR curve and AP over any number of frames."""
    cfg = cfg or EvalConfig()
    if len(gts) == 0:
        raise DegenerateEval("evaluation needs at least one ground-truth box")
    kept = _filter(dets, cfg)
    dets_by_frame = _group_by_frame(kept)
    gts_by_frame = _group_by_frame(gts)
    per_frame = {}
    tp = fp = fn = 0
    for fid in sorted(set(dets_by_frame) | set(gts_by_frame)):
        m = match_frame(dets_by_frame.get(fid, []), gts_by_frame.get(fid, []), cfg)
        per_frame[fid] = (m.tp, m.fp, m.fn)
        tp += m.tp
        fp += m.fp
        fn += m.fn
    points, _, sweep_tp, sweep_fp = _cumulative_sweep(kept, gts, cfg)
    assert (sweep_tp, sweep_fp) == (tp, fp), "per-frame and sweep totals diverged"
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(
        ap=average_precision(points),
        precision=precision,
        recall=recall,
        f1=f1,
        tp=tp,
        fp=fp,
        fn=fn,
        pr_points=points,
        per_frame=per_frame,
    )


def sweep_iou(dets, gts, thresholds, cfg: EvalConfig | None = None) -> list[SweepRow]:
    """One full evaluation per IoU threshold."""
    cfg = cfg or EvalConfig()
    rows = []
    for t in thresholds:
        tcfg = EvalConfig(
            iou_threshold=float(t),
            confidence_floor=cfg.confidence_floor,
            ap_interpolation=cfg.ap_interpolation,
            tie_order=cfg.tie_order,
        )
        rep = evaluate(dets, gts, tcfg)
        rows.append(SweepRow(threshold=float(t), ap=rep.ap, tp=rep.tp, fn=rep.fn, fp=rep.fp))
    return rows


def ingest_external_detections(path) -> list[DetectionRecord]:
    """Baseline detector output in the native detection-line format."""
    return read_detections(path)


# --------------------------------------------------------------------------
# PR curve rendering (standalone SVG)
# --------------------------------------------------------------------------

_SVG_W, _SVG_H, _SVG_PAD = 480, 420, 48
_COLORS = ("#1f6fd0", "#d05a1f", "#2d9c4a", "#8a44b8", "#b8442f", "#555555")


def _sx(r):
    return _SVG_PAD + r * (_SVG_W - 2 * _SVG_PAD)


def _sy(p):
    return _SVG_H - _SVG_PAD - p * (_SVG_H - 2 * _SVG_PAD)


def render_pr_svg(curves: dict[str, list[tuple[float, float]]], path) -> None:
    """Write PR curves (already display-collapsed if desired) as an SVG file."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            f'<line x1="{_sx(t):.1f}" y1="{_sy(0):.1f}" x2="{_sx(t):.1f}" y2="{_sy(1):.1f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{_sx(0):.1f}" y1="{_sy(t):.1f}" x2="{_sx(1):.1f}" y2="{_sy(t):.1f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_sx(t):.1f}" y="{_SVG_H - _SVG_PAD + 18:.1f}" font-size="11" '
            f'text-anchor="middle">{t:g}</text>'
        )
        parts.append(
            f'<text x="{_SVG_PAD - 8:.1f}" y="{_sy(t) + 4:.1f}" font-size="11" '
            f'text-anchor="end">{t:g}</text>'
        )
    parts.append(
        f'<text x="{_SVG_W / 2:.0f}" y="{_SVG_H - 10}" font-size="13" text-anchor="middle">recall</text>'
    )
    parts.append(
        f'<text x="14" y="{_SVG_H / 2:.0f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 14 {_SVG_H / 2:.0f})">precision</text>'
    )
    for ci, (name, pts) in enumerate(curves.items()):
        if not pts:
            continue
        color = _COLORS[ci % len(_COLORS)]
        # Anchor at recall 0 with the first precision: a one-point curve
        # (uniform confidence) becomes a horizontal line.
        chain = [(0.0, pts[0][1])] + list(pts)
        coords = " ".join(f"{_sx(r):.2f},{_sy(p):.2f}" for r, p in chain)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for r, p in pts:
            parts.append(f'<circle cx="{_sx(r):.2f}" cy="{_sy(p):.2f}" r="3" fill="{color}"/>')
        parts.append(
            f'<text x="{_SVG_W - _SVG_PAD:.0f}" y="{_SVG_PAD + 16 * ci:.0f}" font-size="12" '
            f'text-anchor="end" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
