"""Per-stage timing of the detection pipeline.

Each iteration re-parses the frame from an in-memory copy of its file
bytes (the ingest stage), then runs the same stage functions ``detect``
composes, with a monotonic-clock reading between stages.  The residual
between the end-to-end iteration time and the stage sum lands in the
"other" bucket, so stage sums always reconcile with the total.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import formats, mlp, pipeline
from .errors import DomainError
from .pipeline import ClothingMap, DetectionSet, PipelineParams
from .radiometry import WbCoefficients, apply_wb

STAGES = (
    "frame-ingest",
    "wb-correction",
    "spectrum-extraction",
    "mlp-inference",
    "pixel-classification",
    "map-generation",
    "postprocess",
    "box-output",
    "other",
)


@dataclass
class TimingReport:
    stage_mean_ms: dict[str, float]
    stage_sd_ms: dict[str, float]
    total_mean_ms: float
    total_sd_ms: float
    fps: float
    iterations: int
    resolution: str
    result: DetectionSet | None = field(default=None, repr=False)


def _run_once(frame_bytes, wb, model, params, frame_id, clock=time.perf_counter_ns):
    marks = np.empty(8, dtype=np.float64)
    t_start = clock()
    t0 = clock()
    frame = formats.parse_frame(frame_bytes)
    t1 = clock()
    corrected = apply_wb(frame, wb)
    t2 = clock()
    spectra = pipeline.extract_spectra(corrected)
    t3 = clock()
    logits = mlp.forward_batch(model, spectra)
    t4 = clock()
    _, clothing = mlp.classify_batch(model.labels, logits)
    t5 = clock()
    cmap = ClothingMap(frame.width, frame.height, clothing.reshape(frame.height, frame.width))
    t6 = clock()
    cleaned = pipeline.close_regions(pipeline.denoise(cmap, params), params)
    comps = pipeline.connected_components(cleaned, params.connectivity)
    t7 = clock()
    dets = pipeline.fit_boxes(comps, frame_id)
    formats.detections_to_text(dets.boxes)
    t8 = clock()
    cuts = np.array([t0, t1, t2, t3, t4, t5, t6, t7, t8], dtype=np.float64)
    marks[:] = np.diff(cuts)
    total = float(clock() - t_start)
    return marks, total, dets


def time_pipeline(
    frame: formats.MultibandFrame,
    wb: WbCoefficients,
    model: mlp.MlpModel,
    params: PipelineParams | None = None,
    iterations: int = 100,
    warmup: int = 10,
    frame_id: str = "frame",
) -> TimingReport:
    """Time ``iterations`` full pipeline runs after ``warmup`` untimed ones."""
    if iterations < 1:
        raise DomainError("iterations must be >= 1")
    params = params or PipelineParams()
    frame_bytes = formats.frame_to_bytes(frame)
    for _ in range(warmup):
        _run_once(frame_bytes, wb, model, params, frame_id)

    samples = np.empty((iterations, len(STAGES)), dtype=np.float64)
    totals = np.empty(iterations, dtype=np.float64)
    dets = None
    for it in range(iterations):
        marks, total, dets = _run_once(frame_bytes, wb, model, params, frame_id)
        samples[it, :8] = marks
        samples[it, 8] = max(0.0, total - marks.sum())
        totals[it] = total

    to_ms = 1e-6
    mean = samples.mean(axis=0) * to_ms
    sd = samples.std(axis=0) * to_ms
    total_mean = float(totals.mean() * to_ms)
    return TimingReport(
        stage_mean_ms={s: float(m) for s, m in zip(STAGES, mean)},
        stage_sd_ms={s: float(v) for s, v in zip(STAGES, sd)},
        total_mean_ms=total_mean,
        total_sd_ms=float(totals.std() * to_ms),
        fps=1000.0 / total_mean,
        iterations=iterations,
        resolution=f"{frame.width}x{frame.height}",
        result=dets,
    )


def write_timing_csv(report: TimingReport, path) -> None:
    lines = ["stage,mean_ms,sd_ms"]
    for stage in STAGES:
        lines.append(f"{stage},{report.stage_mean_ms[stage]:.6f},{report.stage_sd_ms[stage]:.6f}")
    lines.append(f"total,{report.total_mean_ms:.6f},{report.total_sd_ms:.6f}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in lines))
