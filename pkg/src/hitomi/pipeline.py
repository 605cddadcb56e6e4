"""Online detection path: corrected frame to bounding boxes.

Stages, in order: white-balance correction, per-pixel spectrum packing,
MLP logits, argmax plus clothing-category lookup, clothing map, noise
removal (opening + minimum component area), morphological closing,
connected components, box fitting.  Every stage is a separate function so
the benchmark can time them individually; ``detect`` is their composition.

Classification is strictly per pixel, so the clothing map commutes with
any spatial permutation of the frame (rotations, flips); nothing in this
pipeline looks at shape until the morphology stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels, mlp
from .errors import DomainError, ShapeError
from .formats import DetectionRecord, MultibandFrame
from .radiometry import WbCoefficients, apply_wb


@dataclass
class ClothingMap:
    """Per-pixel clothing mask, dimensions equal to the source frame."""

    width: int
    height: int
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.ascontiguousarray(self.mask, dtype=bool)
        if self.mask.shape != (self.height, self.width):
            raise ShapeError(f"mask shape {self.mask.shape} != (h={self.height}, w={self.width})")


@dataclass
class PipelineParams:
    min_component_area: int = 8
    open_kernel: int = 3
    close_kernel: int = 3
    close_iterations: int = 1
    connectivity: int = 8

    def __post_init__(self):
        for name in ("open_kernel", "close_kernel"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise DomainError(f"{name} must be odd and >= 1")
        if self.min_component_area < 1:
            raise DomainError("min_component_area must be >= 1")
        if self.connectivity not in (4, 8):
            raise DomainError("connectivity must be 4 or 8")
        if self.close_iterations < 0:
            raise DomainError("close_iterations must be >= 0")


@dataclass
class Component:
    """One connected set of clothing pixels (row/col arrays, row-major)."""

    rows: np.ndarray
    cols: np.ndarray

    @property
    def area(self) -> int:
        return int(self.rows.size)

    def pixel_set(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))


@dataclass
class DetectionSet:
    frame_id: str
    boxes: list[DetectionRecord] = field(default_factory=list)
    support: list[int] = field(default_factory=list)  # clothing pixels per box


def extract_spectra(frame: MultibandFrame) -> np.ndarray:
    """All pixel band vectors as one (width*height, bands) float64 matrix."""
    return np.ascontiguousarray(
        frame.data.transpose(1, 2, 0).reshape(-1, frame.bands), dtype=np.float64
    )


def classify_frame(frame: MultibandFrame, wb: WbCoefficients, model: mlp.MlpModel) -> ClothingMap:
    """Per-pixel clothing/non-clothing decision on the corrected frame."""
    if frame.bands != model.layers[0].in_dim:
        raise ShapeError(f"{frame.bands}-band frame vs {model.layers[0].in_dim}-input model")
    corrected = apply_wb(frame, wb)
    spectra = extract_spectra(corrected)
    logits = mlp.forward_batch(model, spectra)
    _, clothing = mlp.classify_batch(model.labels, logits)
    return ClothingMap(frame.width, frame.height, clothing.reshape(frame.height, frame.width))


def denoise(cmap: ClothingMap, params: PipelineParams) -> ClothingMap:
    """Opening with the square open kernel, then drop small components."""
    mask = kernels.dilate(kernels.erode(cmap.mask, params.open_kernel), params.open_kernel)
    if params.min_component_area > 1:
        labels, count = kernels.label_components(mask, params.connectivity)
        if count:
            areas = np.bincount(labels[labels >= 0], minlength=count)
            keep = areas >= params.min_component_area
            mask = np.where(labels >= 0, keep[np.clip(labels, 0, None)], False)
    return ClothingMap(cmap.width, cmap.height, mask)


def close_regions(cmap: ClothingMap, params: PipelineParams) -> ClothingMap:
    """Dilate N times then erode N times with the square close kernel."""
    mask = cmap.mask
    for _ in range(params.close_iterations):
        mask = kernels.dilate(mask, params.close_kernel)
    for _ in range(params.close_iterations):
        mask = kernels.erode(mask, params.close_kernel)
    return ClothingMap(cmap.width, cmap.height, mask)


def connected_components(cmap: ClothingMap, connectivity: int = 8) -> list[Component]:
    """Maximal connected true-pixel sets, ordered by first row-major pixel."""
    if connectivity not in (4, 8):
        raise DomainError("connectivity must be 4 or 8")
    labels, count = kernels.label_components(cmap.mask, connectivity)
    if count == 0:
        return []
    flat = labels.ravel()
    hits = np.flatnonzero(flat >= 0)
    order = hits[np.argsort(flat[hits], kind="stable")]  # group by label, row-major inside
    counts = np.bincount(flat[hits], minlength=count)
    comps = []
    start = 0
    width = cmap.width
    for n in counts:
        chunk = order[start : start + n]
        comps.append(Component(rows=chunk // width, cols=chunk % width))
        start += n
    return comps


def fit_boxes(components: list[Component], frame_id: str = "frame") -> DetectionSet:
    """Tight axis-aligned box per component, confidence fixed at 1.0."""
    out = DetectionSet(frame_id=frame_id)
    for comp in components:
        x = int(comp.cols.min())
        y = int(comp.rows.min())
        out.boxes.append(
            DetectionRecord(
                frame_id=frame_id,
                x=x,
                y=y,
                w=int(comp.cols.max()) - x + 1,
                h=int(comp.rows.max()) - y + 1,
                confidence=1.0,
            )
        )
        out.support.append(comp.area)
    return out


def detect(
    frame: MultibandFrame,
    wb: WbCoefficients,
    model: mlp.MlpModel,
    params: PipelineParams | None = None,
    frame_id: str = "frame",
) -> DetectionSet:
    """Full pipeline on one frame."""
    params = params or PipelineParams()
    cmap = classify_frame(frame, wb, model)
    cleaned = close_regions(denoise(cmap, params), params)
    return fit_boxes(connected_components(cleaned, params.connectivity), frame_id)
