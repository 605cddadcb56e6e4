"""Synthetic 4-band scenes and labeled spectral datasets.

Stands in for camera hardware and field data: stylized material
reflectance curves are pushed through a Gaussian band model (sigma =
FWHM / 2.3548, 1 nm quadrature over +-3 sigma, illuminant-normalized) to
get per-band responses, which are painted into frames or sampled into
training sets.  All randomness comes from counter-based splitmix64
streams keyed by (seed, band, pixel), so renders are reproducible and
independent of traversal order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, SpecError
from .formats import (
    DEFAULT_BAND_CENTERS_NM,
    DEFAULT_BAND_FWHM_NM,
    GroundTruthBox,
    LabelTable,
    MultibandFrame,
)
from .mlp import SpectralDataset, TrainConfig
from .pipeline import ClothingMap
from .rng import derive_seed, normal_stream, uniform_stream

FWHM_TO_SIGMA = 1.0 / 2.3548
_GRID_NM = np.linspace(400.0, 800.0, 17)


@dataclass
class MaterialSignature:
    """Piecewise-linear reflectance over wavelength, values in [0, 1]."""

    name: str
    is_clothing: bool
    wavelengths_nm: np.ndarray
    reflectance: np.ndarray

    def __post_init__(self):
        self.wavelengths_nm = np.asarray(self.wavelengths_nm, dtype=np.float64)
        self.reflectance = np.asarray(self.reflectance, dtype=np.float64)
        if self.wavelengths_nm.size < 10 or self.wavelengths_nm.shape != self.reflectance.shape:
            raise SpecError(f"{self.name}: need >= 10 matched wavelength samples")
        if np.any(np.diff(self.wavelengths_nm) <= 0):
            raise SpecError(f"{self.name}: wavelengths must be strictly increasing")
        if np.any(self.reflectance < 0) or np.any(self.reflectance > 1):
            raise SpecError(f"{self.name}: reflectance must stay in [0, 1]")

    def at(self, wl) -> np.ndarray:
        return np.interp(wl, self.wavelengths_nm, self.reflectance)


@dataclass
class Illuminant:
    name: str
    wavelengths_nm: np.ndarray
    power: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        self.wavelengths_nm = np.asarray(self.wavelengths_nm, dtype=np.float64)
        self.power = np.asarray(self.power, dtype=np.float64)
        if self.wavelengths_nm.shape != self.power.shape or np.any(self.power < 0):
            raise SpecError(f"{self.name}: spectral power must be non-negative")
        if not (self.scale > 0):
            raise SpecError(f"{self.name}: scale must be positive")

    def at(self, wl) -> np.ndarray:
        return np.interp(wl, self.wavelengths_nm, self.power) * self.scale


@dataclass
class PlacedShape:
    """A material patch: rect (x,y,w,h), ellipse (cx,cy,rx,ry) or polygon."""

    material: str
    kind: str
    x: float = 0.0
    y: float = 0.0
    w: float = 0.0
    h: float = 0.0
    cx: float = 0.0
    cy: float = 0.0
    rx: float = 0.0
    ry: float = 0.0
    points: list[tuple[float, float]] = field(default_factory=list)

    def bounds(self):
        if self.kind == "rect":
            return self.x, self.y, self.x + self.w, self.y + self.h
        if self.kind == "ellipse":
            return self.cx - self.rx, self.cy - self.ry, self.cx + self.rx, self.cy + self.ry
        if self.kind == "polygon":
            xs = [p[0] for p in self.points]
            ys = [p[1] for p in self.points]
            return min(xs), min(ys), max(xs), max(ys)
        raise SpecError(f"unknown shape kind {self.kind!r}")


@dataclass
class SceneSpec:
    width: int
    height: int
    background: str
    shapes: list[PlacedShape]
    materials: list[MaterialSignature]
    illuminant: Illuminant
    shading: np.ndarray | None = None  # per-pixel scale in (0, 1]
    noise_sigma: float = 0.0
    seed: int = 0
    name: str = "scene"
    band_centers_nm: tuple = DEFAULT_BAND_CENTERS_NM
    band_fwhm_nm: tuple = DEFAULT_BAND_FWHM_NM

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise SpecError("scene needs positive dimensions")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise SpecError("noise_sigma must be finite and >= 0")
        names = {m.name for m in self.materials}
        if self.background not in names:
            raise SpecError(f"unknown background material {self.background!r}")
        for s in self.shapes:
            if s.material not in names:
                raise SpecError(f"unknown shape material {s.material!r}")
            x0, y0, x1, y1 = s.bounds()
            if x0 < 0 or y0 < 0 or x1 > self.width or y1 > self.height:
                raise SpecError(f"shape bounds {(x0, y0, x1, y1)} exceed the frame")
        if self.shading is not None:
            self.shading = np.asarray(self.shading, dtype=np.float64)
            if self.shading.shape != (self.height, self.width):
                raise SpecError("shading field must be (height, width)")
            if np.any(self.shading <= 0) or np.any(self.shading > 1):
                raise SpecError("shading values must lie in (0, 1]")


def band_response(
    signature: MaterialSignature, illuminant: Illuminant, center_nm: float, fwhm_nm: float
) -> float:
    """Illuminant-weighted mean reflectance inside a Gaussian passband."""
    if not (signature.wavelengths_nm[0] <= center_nm <= signature.wavelengths_nm[-1]):
        raise DomainError(f"band center {center_nm} nm outside {signature.name}'s domain")
    sigma = fwhm_nm * FWHM_TO_SIGMA
    half = int(math.floor(3.0 * sigma))
    wl = center_nm + np.arange(-half, half + 1, dtype=np.float64)  # 1 nm steps
    g = np.exp(-0.5 * ((wl - center_nm) / sigma) ** 2)
    weights = illuminant.at(wl) * g
    denom = weights.sum()
    if denom <= 0:
        raise DomainError("illuminant carries no power inside the band")
    return float((weights * signature.at(wl)).sum() / denom)


def band_vector(signature, illuminant, centers=DEFAULT_BAND_CENTERS_NM, fwhm=DEFAULT_BAND_FWHM_NM):
    return np.array([band_response(signature, illuminant, c, f) for c, f in zip(centers, fwhm)])


def _rasterize(shape: PlacedShape, width: int, height: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    px = xx + 0.5  # pixel centers
    py = yy + 0.5
    if shape.kind == "rect":
        return (px >= shape.x) & (px < shape.x + shape.w) & (py >= shape.y) & (py < shape.y + shape.h)
    if shape.kind == "ellipse":
        if shape.rx <= 0 or shape.ry <= 0:
            raise SpecError("ellipse radii must be positive")
        return ((px - shape.cx) / shape.rx) ** 2 + ((py - shape.cy) / shape.ry) ** 2 <= 1.0
    if shape.kind == "polygon":
        pts = shape.points
        if len(pts) < 3:
            raise SpecError("polygon needs at least 3 vertices")
        inside = np.zeros((height, width), dtype=bool)
        for i in range(len(pts)):  # even-odd ray casting at pixel centers
            x0, y0 = pts[i]
            x1, y1 = pts[(i + 1) % len(pts)]
            if y0 == y1:
                continue
            crosses = (py >= min(y0, y1)) & (py < max(y0, y1))
            xing = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (px < xing)
        return inside
    raise SpecError(f"unknown shape kind {shape.kind!r}")


def render_scene(spec: SceneSpec):
    """Paint background and shapes, apply shading and noise.

    Returns (frame, ground-truth boxes for visible clothing shapes, oracle
    clothing map).  Later shapes overwrite earlier ones.  Noise for band b
    at flat pixel index i comes from stream (seed, b) at counter i.
    """
    mats = {m.name: m for m in spec.materials}
    by_index = [spec.background] + [s.material for s in spec.shapes]
    vectors = np.stack(
        [
            band_vector(mats[n], spec.illuminant, spec.band_centers_nm, spec.band_fwhm_nm)
            for n in by_index
        ]
    )
    owner = np.zeros((spec.height, spec.width), dtype=np.int32)
    for si, shape in enumerate(spec.shapes, start=1):
        owner[_rasterize(shape, spec.width, spec.height)] = si

    img = vectors[owner].transpose(2, 0, 1)  # (bands, H, W) of float64
    if spec.shading is not None:
        img = img * spec.shading[None, :, :]
    if spec.noise_sigma > 0:
        npix = spec.height * spec.width
        counters = np.arange(npix, dtype=np.uint64)
        for b in range(img.shape[0]):
            noise = normal_stream(derive_seed(spec.seed, b), counters)
            img[b] += spec.noise_sigma * noise.reshape(spec.height, spec.width)
    np.clip(img, 0.0, None, out=img)

    frame = MultibandFrame(
        data=img.astype(np.float32),
        band_centers_nm=np.asarray(spec.band_centers_nm, dtype=np.float32),
        band_fwhm_nm=np.asarray(spec.band_fwhm_nm, dtype=np.float32),
    )
    boxes = []
    for si, shape in enumerate(spec.shapes, start=1):
        if not mats[shape.material].is_clothing:
            continue
        ys, xs = np.nonzero(owner == si)
        if ys.size == 0:
            continue  # fully covered by later shapes
        x0, y0 = int(xs.min()), int(ys.min())
        boxes.append(
            GroundTruthBox(
                frame_id=spec.name,
                x=x0,
                y=y0,
                w=int(xs.max()) - x0 + 1,
                h=int(ys.max()) - y0 + 1,
            )
        )
    clothing = np.array([mats[n].is_clothing for n in by_index])
    oracle = ClothingMap(spec.width, spec.height, clothing[owner])
    return frame, boxes, oracle


def generate_training_set(
    materials: list[MaterialSignature],
    illuminant: Illuminant,
    n_per_material: int,
    cfg: TrainConfig | None = None,
    seed: int = 0,
    noise_sigma: float = 0.01,
    augment: bool = True,
) -> SpectralDataset:
    """Sample labeled band vectors from a material library.

    Each sample is the material's band vector scaled by a luminance factor
    drawn uniformly from [cfg.aug_min, cfg.aug_max] (when augmenting) plus
    additive Gaussian noise, clamped non-negative.
    """
    cfg = cfg or TrainConfig()
    if not any(m.is_clothing for m in materials) or all(m.is_clothing for m in materials):
        raise SpecError("need at least one clothing and one background material")
    table = LabelTable([m.name for m in materials], [m.is_clothing for m in materials])
    rows = []
    labels = []
    for mi, mat in enumerate(materials):
        base = band_vector(mat, illuminant)
        counters = np.arange(n_per_material, dtype=np.uint64)
        if augment:
            u = uniform_stream(derive_seed(seed, mi, 0), counters)
            factors = cfg.aug_min + u * (cfg.aug_max - cfg.aug_min)
        else:
            factors = np.ones(n_per_material)
        samples = factors[:, None] * base[None, :]
        if noise_sigma > 0:
            noise = normal_stream(derive_seed(seed, mi, 1), np.arange(n_per_material * 4, dtype=np.uint64))
            samples = samples + noise_sigma * noise.reshape(n_per_material, 4)
        rows.append(np.clip(samples, 0.0, None))
        labels.extend([mi] * n_per_material)
    return SpectralDataset(np.vstack(rows), np.asarray(labels, dtype=np.int64), table)


# --------------------------------------------------------------------------
# Builtin library
# --------------------------------------------------------------------------


def _sig(name, is_clothing, values):
    return MaterialSignature(name, is_clothing, _GRID_NM, np.asarray(values))


def builtin_library() -> list[MaterialSignature]:
    """Stylized signatures on a 400-800 nm grid (25 nm spacing).

    Clothing curves carry elevated 700-800 nm reflectance relative to their
    visible level; backgrounds are either flat (soil, asphalt, charts), NIR
    dark with a blue peak (tarp), or vegetation-like with a green bump, red
    well and red edge.  Flat gray chart entries double as the color-chart
    style background reinforcement used when sampling training sets.
    """
    return [
        # clothing                400   425   450   475   500   525   550   575   600   625   650   675   700   725   750   775   800
        _sig("polyester_white", True, [0.70, 0.72, 0.74, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 0.76, 0.80, 0.86, 0.92, 0.95, 0.95, 0.95]),
        _sig("cotton_blue", True, [0.35, 0.50, 0.55, 0.45, 0.30, 0.20, 0.15, 0.12, 0.12, 0.14, 0.20, 0.35, 0.55, 0.70, 0.75, 0.78, 0.80]),
        _sig("cotton_red", True, [0.08, 0.08, 0.09, 0.10, 0.10, 0.12, 0.15, 0.30, 0.55, 0.65, 0.70, 0.72, 0.75, 0.78, 0.80, 0.80, 0.80]),
        _sig("wool_gray", True, [0.33, 0.34, 0.35, 0.35, 0.35, 0.35, 0.35, 0.35, 0.36, 0.38, 0.42, 0.48, 0.54, 0.58, 0.60, 0.62, 0.62]),
        _sig("polyester_black", True, [0.05, 0.05, 0.06, 0.06, 0.06, 0.06, 0.06, 0.06, 0.07, 0.08, 0.12, 0.20, 0.28, 0.34, 0.38, 0.40, 0.42]),
        _sig("nylon_green", True, [0.08, 0.10, 0.15, 0.25, 0.40, 0.50, 0.45, 0.30, 0.20, 0.18, 0.25, 0.40, 0.60, 0.70, 0.75, 0.76, 0.78]),
        _sig("fleece_orange", True, [0.10, 0.10, 0.12, 0.15, 0.20, 0.30, 0.45, 0.60, 0.68, 0.70, 0.72, 0.75, 0.78, 0.80, 0.82, 0.82, 0.82]),
        _sig("denim_navy", True, [0.25, 0.30, 0.32, 0.28, 0.22, 0.16, 0.12, 0.10, 0.10, 0.10, 0.14, 0.22, 0.32, 0.40, 0.46, 0.50, 0.52]),
        _sig("jacket_yellow", True, [0.08, 0.09, 0.12, 0.25, 0.45, 0.60, 0.70, 0.75, 0.78, 0.78, 0.78, 0.80, 0.80, 0.82, 0.84, 0.84, 0.84]),
        # backgrounds
        _sig("vegetation_grass", False, [0.03, 0.04, 0.04, 0.06, 0.10, 0.14, 0.15, 0.12, 0.08, 0.05, 0.04, 0.05, 0.20, 0.40, 0.50, 0.52, 0.55]),
        _sig("dry_soil", False, [0.10, 0.12, 0.14, 0.16, 0.18, 0.20, 0.22, 0.24, 0.26, 0.28, 0.30, 0.31, 0.32, 0.33, 0.34, 0.35, 0.36]),
        _sig("asphalt", False, [0.09, 0.09, 0.10, 0.10, 0.10, 0.11, 0.11, 0.11, 0.12, 0.12, 0.12, 0.12, 0.13, 0.13, 0.13, 0.14, 0.14]),
        _sig("blue_tarp", False, [0.35, 0.50, 0.60, 0.55, 0.35, 0.20, 0.12, 0.10, 0.08, 0.08, 0.08, 0.09, 0.10, 0.10, 0.11, 0.12, 0.12]),
        _sig("white_plate", False, [0.95] * 17),
        _sig("chart_gray_02", False, [0.20] * 17),
        _sig("chart_gray_05", False, [0.50] * 17),
        _sig("chart_gray_08", False, [0.82] * 17),
    ]


def flat_illuminant(scale: float = 1.0) -> Illuminant:
    return Illuminant("flat", _GRID_NM, np.ones_like(_GRID_NM), scale)


def daylight_illuminant(scale: float = 1.0) -> Illuminant:
    """Mild daylight-like tilt: stronger mid-visible, softer ends."""
    power = np.array(
        [0.75, 0.82, 0.90, 0.96, 1.00, 1.02, 1.02, 1.00, 0.98, 0.96, 0.94, 0.92, 0.90, 0.88, 0.86, 0.84, 0.82]
    )
    return Illuminant("daylight", _GRID_NM, power, scale)


def builtin_illuminants() -> dict[str, Illuminant]:
    return {"flat": flat_illuminant(), "daylight": daylight_illuminant()}


# --------------------------------------------------------------------------
# JSON scene / dataset specs (CLI surface)
# --------------------------------------------------------------------------


def _materials_from_obj(obj) -> list[MaterialSignature]:
    if obj is None or obj == "builtin":
        return builtin_library()
    return [
        MaterialSignature(
            m["name"],
            bool(m["is_clothing"]),
            np.asarray(m["wavelengths"], dtype=np.float64),
            np.asarray(m["reflectance"], dtype=np.float64),
        )
        for m in obj
    ]


def _illuminant_from_obj(obj) -> Illuminant:
    if obj is None:
        return flat_illuminant()
    if isinstance(obj, str):
        table = builtin_illuminants()
        if obj not in table:
            raise SpecError(f"unknown illuminant {obj!r}")
        return table[obj]
    return Illuminant(
        obj.get("name", "custom"),
        np.asarray(obj["wavelengths"], dtype=np.float64),
        np.asarray(obj["power"], dtype=np.float64),
        float(obj.get("scale", 1.0)),
    )


def _shading_from_obj(obj, width, height):
    if obj is None or obj.get("kind", "none") == "none":
        return None
    if obj["kind"] == "linear":
        start = float(obj.get("start", 1.0))
        end = float(obj.get("end", 1.0))
        axis = obj.get("axis", "x")
        ramp = np.linspace(start, end, width if axis == "x" else height)
        if axis == "x":
            return np.tile(ramp, (height, 1))
        return np.tile(ramp[:, None], (1, width))
    raise SpecError(f"unknown shading kind {obj['kind']!r}")


def _shape_from_obj(obj) -> PlacedShape:
    kind = obj["kind"]
    if kind == "rect":
        return PlacedShape(obj["material"], "rect", x=obj["x"], y=obj["y"], w=obj["w"], h=obj["h"])
    if kind == "ellipse":
        return PlacedShape(
            obj["material"], "ellipse", cx=obj["cx"], cy=obj["cy"], rx=obj["rx"], ry=obj["ry"]
        )
    if kind == "polygon":
        return PlacedShape(obj["material"], "polygon", points=[tuple(p) for p in obj["points"]])
    raise SpecError(f"unknown shape kind {kind!r}")


def load_scene_spec(path) -> SceneSpec:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        width = int(obj["width"])
        height = int(obj["height"])
        return SceneSpec(
            width=width,
            height=height,
            background=obj["background"],
            shapes=[_shape_from_obj(s) for s in obj.get("shapes", [])],
            materials=_materials_from_obj(obj.get("materials")),
            illuminant=_illuminant_from_obj(obj.get("illuminant")),
            shading=_shading_from_obj(obj.get("shading"), width, height),
            noise_sigma=float(obj.get("noise_sigma", 0.0)),
            seed=int(obj.get("seed", 0)),
            name=obj.get("name", Path(path).stem),
        )
    except SpecError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad scene spec: {exc}") from exc


def load_dataset_spec(path):
    """Dataset spec JSON -> kwargs for generate_training_set."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return {
            "materials": _materials_from_obj(obj.get("materials")),
            "illuminant": _illuminant_from_obj(obj.get("illuminant")),
            "n_per_material": int(obj.get("n_per_material", 200)),
            "seed": int(obj.get("seed", 0)),
            "noise_sigma": float(obj.get("noise_sigma", 0.01)),
            "augment": bool(obj.get("augment", True)),
        }
    except SpecError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad dataset spec: {exc}") from exc
