"""White-balance calibration and per-pixel spectrum access.

Illumination spectra vary scene to scene; per-band gains computed from a
white-plate region flatten the plate's band means so the classifier sees
data consistent with what it was trained on.  Gains persist to a small
JSON sidecar so a scene's calibration is reusable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BoundsError, DegenerateWhitePlate, FormatError, ShapeError
from .formats import MultibandFrame

MEAN_EPS = 1e-9


@dataclass
class WbCoefficients:
    """Per-band gains plus the flat level the white plate maps to."""

    gains: np.ndarray
    reference_target: float

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=np.float64)
        if self.gains.ndim != 1 or self.gains.size == 0:
            raise ShapeError("gains must be a non-empty vector")
        if not np.all(np.isfinite(self.gains)) or np.any(self.gains <= 0):
            raise ShapeError("gains must be finite and positive")

    @classmethod
    def identity(cls, bands: int = 4) -> "WbCoefficients":
        return cls(np.ones(bands), 1.0)


def compute_wb(frame: MultibandFrame, white_region) -> WbCoefficients:
    """Gains mapping every band's mean over ``white_region`` to one level.

    The target level is the arithmetic mean of the per-band region means,
    so gain[b] = target / mean[b].
    """
    x, y, w, h = (int(v) for v in white_region)
    if w < 1 or h < 1:
        raise BoundsError("white region needs positive width and height")
    if x < 0 or y < 0 or x + w > frame.width or y + h > frame.height:
        raise BoundsError(
            f"white region {(x, y, w, h)} outside {frame.width}x{frame.height} frame"
        )
    region = frame.data[:, y : y + h, x : x + w]
    means = region.mean(axis=(1, 2), dtype=np.float64)
    if np.any(means <= MEAN_EPS):
        raise DegenerateWhitePlate(f"band means {means.tolist()} too close to zero")
    target = float(means.mean())
    return WbCoefficients(gains=target / means, reference_target=target)


def apply_wb(frame: MultibandFrame, wb: WbCoefficients) -> MultibandFrame:
    """Scale each band by its gain; dimensions and metadata unchanged."""
    if wb.gains.size != frame.bands:
        raise ShapeError(f"{wb.gains.size} gains vs {frame.bands} bands")
    corrected = frame.data * wb.gains[:, None, None].astype(np.float32)
    return MultibandFrame(
        data=corrected.astype(np.float32),
        band_centers_nm=frame.band_centers_nm,
        band_fwhm_nm=frame.band_fwhm_nm,
    )


def extract_spectrum(frame: MultibandFrame, x: int, y: int) -> np.ndarray:
    """The one-pixel band vector at (x, y), float64."""
    if not (0 <= x < frame.width and 0 <= y < frame.height):
        raise BoundsError(f"pixel ({x}, {y}) outside {frame.width}x{frame.height} frame")
    return frame.data[:, y, x].astype(np.float64)


def save_wb(wb: WbCoefficients, path) -> None:
    payload = {"gains": [float(g) for g in wb.gains], "target": float(wb.reference_target)}
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_wb(path) -> WbCoefficients:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return WbCoefficients(np.asarray(obj["gains"], dtype=np.float64), float(obj["target"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"bad WB sidecar: {exc}") from exc
