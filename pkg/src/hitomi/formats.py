"""On-disk artifact formats.

Frame container ("HMC1"), JSON-lines annotation/detection records, model
and sidecar files live next to the code that owns them; this module holds
the frame container, the record files, portable graymaps for mask dumps,
and the CSV report writer.

Frame file layout, all little-endian:

    magic "HMC1" | u32 width | u32 height | u32 bands
    | bands x f32 center_nm | bands x f32 fwhm_nm
    | width*height*bands x f32 samples (band-major, row-major per band)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"HMC1"

DEFAULT_BAND_CENTERS_NM = (457.0, 565.0, 645.0, 735.0)
DEFAULT_BAND_FWHM_NM = (36.0, 25.0, 21.0, 29.0)
DEFAULT_WIDTH = 253
DEFAULT_HEIGHT = 190

REPORT_COLUMNS = ("model", "scene", "iou", "ap", "precision", "recall", "f1", "tp", "fp", "fn")


@dataclass
class MultibandFrame:
    """Planar multi-band intensity image with its band metadata.

    ``data`` has shape (bands, height, width), float32, finite and >= 0.
    Band center/FWHM arrays are float32 so a write/read cycle is bit-exact.
    """

    data: np.ndarray
    band_centers_nm: np.ndarray
    band_fwhm_nm: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        self.band_centers_nm = np.asarray(self.band_centers_nm, dtype=np.float32)
        self.band_fwhm_nm = np.asarray(self.band_fwhm_nm, dtype=np.float32)
        if self.data.ndim != 3:
            raise FormatError("frame data must be (bands, height, width)")
        bands = self.data.shape[0]
        if bands == 0:
            raise FormatError("frame must have at least one band")
        if self.band_centers_nm.shape != (bands,) or self.band_fwhm_nm.shape != (bands,):
            raise FormatError("band metadata length must equal the band count")
        if not (np.all(self.band_centers_nm > 0) and np.all(self.band_fwhm_nm > 0)):
            raise FormatError("band centers and FWHM must be positive")
        if not np.all(np.isfinite(self.data)):
            raise FormatError("frame intensities must be finite")
        if self.data.size and float(self.data.min()) < 0:
            raise FormatError("frame intensities must be non-negative")

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class GroundTruthBox:
    """Manually annotated box; integer pixels, origin top-left, half-open."""

    frame_id: str
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise FormatError("ground-truth box needs w, h >= 1")


@dataclass(frozen=True)
class DetectionRecord:
    """Detector output box. Native detections carry confidence 1.0."""

    frame_id: str
    x: int
    y: int
    w: int
    h: int
    confidence: float

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise FormatError("detection box needs w, h >= 1")
        if not (0.0 < self.confidence <= 1.0):
            raise FormatError("confidence must lie in (0, 1]")


@dataclass
class LabelTable:
    """Class names plus the clothing/non-clothing category of each class."""

    names: list[str]
    is_clothing: list[bool]

    def __post_init__(self):
        if len(self.names) != len(self.is_clothing):
            raise FormatError("label table lists must have equal length")
        if not any(self.is_clothing) or all(self.is_clothing):
            raise FormatError("label table needs at least one clothing and one background class")

    def __len__(self) -> int:
        return len(self.names)

    def clothing_mask(self) -> np.ndarray:
        return np.asarray(self.is_clothing, dtype=bool)

    @classmethod
    def default(cls, clothing: int = 39, background: int = 2) -> "LabelTable":
        names = [f"clothing_{i:02d}" for i in range(clothing)]
        names += [f"background_{i:02d}" for i in range(background)]
        return cls(names, [True] * clothing + [False] * background)


# --------------------------------------------------------------------------
# Frame container
# --------------------------------------------------------------------------


def frame_to_bytes(frame: MultibandFrame) -> bytes:
    header = MAGIC + struct.pack("<III", frame.width, frame.height, frame.bands)
    meta = frame.band_centers_nm.astype("<f4").tobytes() + frame.band_fwhm_nm.astype("<f4").tobytes()
    payload = frame.data.astype("<f4").tobytes()
    return header + meta + payload


def parse_frame(blob: bytes) -> MultibandFrame:
    if len(blob) < 16:
        raise FormatError("frame file shorter than its fixed header")
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    width, height, bands = struct.unpack("<III", blob[4:16])
    if bands == 0:
        raise FormatError("frame declares zero bands")
    meta_len = 2 * 4 * bands
    sample_count = width * height * bands
    expected = 16 + meta_len + 4 * sample_count
    if len(blob) != expected:
        raise FormatError(f"payload size mismatch: file has {len(blob)} bytes, header implies {expected}")
    centers = np.frombuffer(blob, dtype="<f4", count=bands, offset=16)
    fwhm = np.frombuffer(blob, dtype="<f4", count=bands, offset=16 + 4 * bands)
    samples = np.frombuffer(blob, dtype="<f4", count=sample_count, offset=16 + meta_len)
    data = samples.reshape(bands, height, width)
    return MultibandFrame(data=data, band_centers_nm=centers, band_fwhm_nm=fwhm)


def read_frame(path) -> MultibandFrame:
    return parse_frame(Path(path).read_bytes())


def write_frame(frame: MultibandFrame, path) -> None:
    Path(path).write_bytes(frame_to_bytes(frame))


def import_band_planes(paths, centers, fwhm) -> MultibandFrame:
    """Stack grayscale plane files (PGM) into a frame, band-major, in order.

    Plane values are kept verbatim; apply any normalization convention
    before or after import (the CLI offers a scale flag).
    """
    planes = [read_pgm(p) for p in paths]
    shapes = {p.shape for p in planes}
    if len(shapes) > 1:
        raise FormatError(f"band planes disagree on dimensions: {sorted(shapes)}")
    data = np.stack([p.astype(np.float32) for p in planes], axis=0)
    return MultibandFrame(data=data, band_centers_nm=centers, band_fwhm_nm=fwhm)


# --------------------------------------------------------------------------
# Annotation / detection record files (JSON lines)
# --------------------------------------------------------------------------


def _parse_record_line(line: str, lineno: int, want_conf: bool):
    try:
        obj = json.loads(line)
        frame_id = obj["frame"]
        x, y, w, h = obj["box"]
        if not isinstance(frame_id, str):
            raise TypeError("frame id must be a string")
        box = tuple(int(v) for v in (x, y, w, h))
        if any(int(v) != v for v in (x, y, w, h)):
            raise ValueError("box coordinates must be integers")
        if want_conf:
            conf = float(obj["conf"])
            return frame_id, box, conf
        return frame_id, box, None
    except FormatError:
        raise
    except Exception as exc:
        raise FormatError(f"line {lineno}: malformed record ({exc})") from exc


def read_annotations(path) -> list[GroundTruthBox]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            frame_id, (x, y, w, h), _ = _parse_record_line(line, lineno, want_conf=False)
            try:
                out.append(GroundTruthBox(frame_id, x, y, w, h))
            except FormatError as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
    return out


def write_annotations(boxes, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for b in boxes:
            fh.write(json.dumps({"frame": b.frame_id, "box": [b.x, b.y, b.w, b.h]}) + "\n")


def read_detections(path) -> list[DetectionRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            frame_id, (x, y, w, h), conf = _parse_record_line(line, lineno, want_conf=True)
            try:
                out.append(DetectionRecord(frame_id, x, y, w, h, conf))
            except FormatError as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
    return out


def detections_to_text(records) -> str:
    lines = [
        json.dumps({"frame": r.frame_id, "box": [r.x, r.y, r.w, r.h], "conf": r.confidence})
        for r in records
    ]
    return "".join(line + "\n" for line in lines)


def write_detections(records, path) -> None:
    Path(path).write_text(detections_to_text(records), encoding="utf-8")


# --------------------------------------------------------------------------
# Portable graymaps (mask dumps, band-plane import)
# --------------------------------------------------------------------------


def read_pgm(path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) graymap into a uint array."""
    blob = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated graymap header")
        tokens.append(blob[start:pos])
    magic, sw, sh, smax = tokens
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"unsupported graymap magic {magic!r}")
    try:
        width, height, maxval = int(sw), int(sh), int(smax)
    except ValueError as exc:
        raise FormatError("non-numeric graymap header field") from exc
    if width < 1 or height < 1 or not (0 < maxval < 65536):
        raise FormatError("graymap header out of range")
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        count = width * height
        body = blob[pos : pos + count * dtype.itemsize]
        if len(body) != count * dtype.itemsize:
            raise FormatError("graymap payload truncated")
        return np.frombuffer(body, dtype=dtype).reshape(height, width).astype(np.uint16)
    values = blob[pos:].split()
    if len(values) != width * height:
        raise FormatError("graymap payload size mismatch")
    return np.array([int(v) for v in values], dtype=np.uint16).reshape(height, width)


def write_pgm(mask_or_gray: np.ndarray, path) -> None:
    """Write a uint8 image (bool masks become 0/255) as binary P5."""
    arr = np.asarray(mask_or_gray)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    arr = arr.astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


# --------------------------------------------------------------------------
# CSV reports
# --------------------------------------------------------------------------


def write_report_csv(rows, path) -> None:
    """Write evaluation rows with the fixed column set REPORT_COLUMNS."""
    lines = [",".join(REPORT_COLUMNS)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in REPORT_COLUMNS))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
