"""Hypercube data model, spectral band grid and cube geometry helpers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DataError,
    EmptyWavelengthList,
    IndexOutOfRange,
    InvalidCube,
    NonPositiveInput,
)

FULL_SCALE = 4095  # 12-bit sensor
DEFAULT_RESOLUTION = (290, 275)  # rows, cols
DEFAULT_FOV_MM = (20.0, 20.0)
DEFAULT_WORKING_DISTANCE_MM = 56.0
WAVELENGTH_LIMITS_NM = (400.0, 1000.0)

# Lesion-at-wavelength preset: 50 nm steps plus the two hemoglobin peaks.
MONTAGE_PRESET_NM = (450, 500, 540, 570, 600, 650, 700, 750, 800, 850, 900, 950)


class Domain(enum.IntEnum):
    RAW_COUNTS = 0
    REFLECTANCE = 1


class BodyPart(str, enum.Enum):
    ARMS = "Arms"
    LEGS = "Legs"
    FACE = "Face"
    NECK = "Neck"
    HANDS = "Hands"
    TORSO = "Torso"
    ABDOMEN = "Abdomen"
    OTHER = "Other"


def _f32_tuple(values) -> tuple[float, ...]:
    # Band metadata is persisted as float32; keep the in-memory values on that grid.
    return tuple(float(v) for v in np.asarray(values, dtype=np.float32).ravel())


@dataclass(frozen=True)
class BandMap:
    """Per-channel center wavelength and FWHM, both in nm."""

    centers: tuple[float, ...]
    fwhm: tuple[float, ...]

    def __post_init__(self):
        centers = _f32_tuple(self.centers)
        fwhm = _f32_tuple(self.fwhm)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "fwhm", fwhm)
        if len(centers) == 0:
            raise DataError("band map needs at least one channel")
        if len(centers) != len(fwhm):
            raise DataError(f"{len(centers)} centers but {len(fwhm)} fwhm values")
        c = np.asarray(centers)
        if not np.all(np.isfinite(c)) or np.any(np.diff(c) <= 0):
            raise DataError("band centers must be finite and strictly increasing")
        lo, hi = WAVELENGTH_LIMITS_NM
        if c[0] < lo or c[-1] > hi:
            raise DataError(f"band centers must lie within [{lo:g}, {hi:g}] nm")
        if not all(math.isfinite(w) and w > 0 for w in fwhm):
            raise DataError("fwhm must be positive")

    @classmethod
    def default(cls, fwhm_start: float = 8.0, fwhm_end: float = 25.0) -> "BandMap":
        """51 channels centered on 450, 460, ..., 950 nm.

        FWHM grows linearly from ``fwhm_start`` at the first channel to
        ``fwhm_end`` at the last.
        """
        centers = 450.0 + 10.0 * np.arange(51)
        return cls(centers, np.linspace(fwhm_start, fwhm_end, 51))

    @property
    def channel_count(self) -> int:
        return len(self.centers)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.centers), np.asarray(self.fwhm)


@dataclass
class CaptureMeta:
    fov_mm: tuple[float, float] = DEFAULT_FOV_MM
    working_distance_mm: float = DEFAULT_WORKING_DISTANCE_MM
    patient_id: str = ""
    body_part: BodyPart = BodyPart.OTHER
    timestamp: str = "1970-01-01T00:00:00"
    # Free-form provenance keys (reference role, frames averaged, ...).
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.fov_mm = (float(self.fov_mm[0]), float(self.fov_mm[1]))
        if not (self.fov_mm[0] > 0 and self.fov_mm[1] > 0):
            raise DataError(f"fov_mm components must be positive, got {self.fov_mm}")
        self.working_distance_mm = float(self.working_distance_mm)
        self.body_part = BodyPart(self.body_part)

    def to_dict(self) -> dict:
        d = {
            "fov_mm": list(self.fov_mm),
            "working_distance_mm": self.working_distance_mm,
            "patient_id": self.patient_id,
            "body_part": self.body_part.value,
            "timestamp": self.timestamp,
        }
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CaptureMeta":
        core = ("fov_mm", "working_distance_mm", "patient_id", "body_part", "timestamp")
        kwargs = {k: d[k] for k in core if k in d}
        extra = {k: v for k, v in d.items() if k not in core}
        return cls(**kwargs, extra=extra)


class HyperCube:
    """A rows x cols x bands cube stored band-interleaved-by-pixel.

    Raw counts are held as ``uint16`` restricted to the 12-bit range,
    reflectance as finite ``float32``.
    """

    def __init__(self, domain: Domain, data, band_map: BandMap, meta: CaptureMeta | None = None):
        self.domain = Domain(domain)
        self.band_map = band_map
        self.meta = meta if meta is not None else CaptureMeta()
        arr = np.asarray(data)
        if arr.ndim != 3:
            raise InvalidCube(f"cube data must be 3-D, got shape {arr.shape}")
        if arr.shape[2] != band_map.channel_count:
            raise InvalidCube(
                f"cube has {arr.shape[2]} bands but band map has {band_map.channel_count}"
            )
        if self.domain is Domain.RAW_COUNTS:
            if arr.dtype.kind not in "ui":
                if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
                    raise InvalidCube("raw counts must be integers")
            if arr.size and (arr.min() < 0 or arr.max() > FULL_SCALE):
                raise InvalidCube(f"raw counts must lie in [0, {FULL_SCALE}]")
            arr = arr.astype(np.uint16)
        else:
            arr = arr.astype(np.float32)
            if not np.all(np.isfinite(arr)):
                raise InvalidCube("reflectance cube contains NaN or Inf")
        self.data = np.ascontiguousarray(arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, HyperCube):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.band_map == other.band_map
            and self.meta == other.meta
            and self.data.dtype == other.data.dtype
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    def __repr__(self):
        return f"HyperCube({self.domain.name}, {self.rows}x{self.cols}x{self.bands})"


def channel_center_wavelength(bm: BandMap, k: int) -> float:
    if not 0 <= k < bm.channel_count:
        raise IndexOutOfRange(f"channel {k} outside 0..{bm.channel_count - 1}")
    return bm.centers[k]


class BandLookup(NamedTuple):
    index: int
    out_of_range: bool


def band_index_for_wavelength(bm: BandMap, wavelength: float) -> BandLookup:
    """Nearest channel to ``wavelength``; ties go to the lower index.

    Wavelengths beyond either end of the grid clamp to the end channel.
    ``out_of_range`` is set when the request lies more than half a grid
    step outside the first or last center.
    """
    if not math.isfinite(wavelength):
        raise DataError(f"wavelength must be finite, got {wavelength}")
    centers = np.asarray(bm.centers)
    # argmin returns the first minimum, which is the lower index on ties.
    idx = int(np.argmin(np.abs(centers - wavelength)))
    if len(centers) > 1:
        lo_half = (centers[1] - centers[0]) / 2
        hi_half = (centers[-1] - centers[-2]) / 2
    else:
        lo_half = hi_half = bm.fwhm[0] / 2
    out = wavelength < centers[0] - lo_half or wavelength > centers[-1] + hi_half
    return BandLookup(idx, bool(out))


def band_slice(cube: HyperCube, k: int) -> np.ndarray:
    if not 0 <= k < cube.bands:
        raise IndexOutOfRange(f"band {k} outside 0..{cube.bands - 1}")
    return cube.data[:, :, k].copy()


def normalize_to_8bit(plane: np.ndarray) -> np.ndarray:
    """Min-max stretch to 0..255; a zero-range plane maps to 0."""
    p = np.asarray(plane, dtype=np.float64)
    lo, hi = p.min(), p.max()
    if hi <= lo:
        return np.zeros(p.shape, dtype=np.uint8)
    return np.rint((p - lo) / (hi - lo) * 255.0).astype(np.uint8)


@dataclass
class Montage:
    image: np.ndarray  # uint8, (grid_rows * rows, grid_cols * cols)
    requested_nm: list[float]
    labels_nm: list[float]
    band_indices: list[int]
    grid: tuple[int, int]
    tile_shape: tuple[int, int]

    def tile(self, i: int) -> np.ndarray:
        r, c = divmod(i, self.grid[1])
        th, tw = self.tile_shape
        return self.image[r * th:(r + 1) * th, c * tw:(c + 1) * tw]

    def labels_document(self) -> dict:
        gr, gc = self.grid
        return {
            "grid": [gr, gc],
            "tile_shape": list(self.tile_shape),
            "tiles": [
                {
                    "index": i,
                    "grid_row": i // gc,
                    "grid_col": i % gc,
                    "requested_nm": req,
                    "center_nm": lab,
                    "band": b,
                }
                for i, (req, lab, b) in enumerate(
                    zip(self.requested_nm, self.labels_nm, self.band_indices)
                )
            ],
        }


def band_montage(cube: HyperCube, wavelengths: Sequence[float], columns: int | None = None) -> Montage:
    """Tile the bands nearest to ``wavelengths`` into one grayscale image.

    Each tile is stretched independently, so faint NIR planes stay visible.
    Tiles follow the input order, row-major; duplicates are kept.
    """
    wavelengths = [float(w) for w in wavelengths]
    if not wavelengths:
        raise EmptyWavelengthList("at least one wavelength is required")
    n = len(wavelengths)
    if columns is None:
        columns = math.ceil(math.sqrt(n))
    columns = max(1, min(columns, n))
    grid_rows = math.ceil(n / columns)
    th, tw = cube.rows, cube.cols
    image = np.zeros((grid_rows * th, columns * tw), dtype=np.uint8)
    labels, indices = [], []
    for i, wl in enumerate(wavelengths):
        k = band_index_for_wavelength(cube.band_map, wl).index
        r, c = divmod(i, columns)
        image[r * th:(r + 1) * th, c * tw:(c + 1) * tw] = normalize_to_8bit(band_slice(cube, k))
        labels.append(cube.band_map.centers[k])
        indices.append(k)
    return Montage(image, wavelengths, labels, indices, (grid_rows, columns), (th, tw))


def area_pixel_density(resolution: tuple[int, int], fov_mm: tuple[float, float]) -> float:
    """Pixels per square millimetre for a sensor imaging ``fov_mm``."""
    rows, cols = resolution
    w, h = fov_mm
    if not (rows > 0 and cols > 0 and w > 0 and h > 0):
        raise NonPositiveInput(f"resolution {resolution} and fov {fov_mm} must be positive")
    return rows * cols / (w * h)
