"""Dark/white referencing: raw counts to reflectance.

R = (X - D) / (W - D), with D and W each the mean of a stack of reference
frames. Cells whose white-minus-dark span falls below ``epsilon`` counts
are zero-filled and counted, never propagated as NaN.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .cube import FULL_SCALE, BandMap, CaptureMeta, Domain, HyperCube
from .errors import EmptyInput, NonPositiveEpsilon, ShapeMismatch

DEFAULT_EPSILON = 1.0
DEFAULT_FRAMES = 100
NEAR_SATURATION = 4000


@dataclass
class ReferencePair:
    dark: np.ndarray
    white: np.ndarray
    frames_averaged: int = DEFAULT_FRAMES
    band_map: BandMap | None = None
    dark_timestamp: str = ""
    white_timestamp: str = ""

    def __post_init__(self):
        self.dark = np.asarray(self.dark, dtype=np.float64)
        self.white = np.asarray(self.white, dtype=np.float64)
        if self.dark.shape != self.white.shape:
            raise ShapeMismatch(f"dark {self.dark.shape} vs white {self.white.shape}")
        if int(self.frames_averaged) < 1:
            raise EmptyInput("frames_averaged must be at least 1")
        self.frames_averaged = int(self.frames_averaged)

    @classmethod
    def from_cubes(cls, dark: HyperCube, white: HyperCube) -> "ReferencePair":
        frames = min(
            int(dark.meta.extra.get("frames_averaged", 1)),
            int(white.meta.extra.get("frames_averaged", 1)),
        )
        return cls(
            dark.data,
            white.data,
            frames_averaged=frames,
            band_map=white.band_map,
            dark_timestamp=dark.meta.timestamp,
            white_timestamp=white.meta.timestamp,
        )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.dark.shape


@dataclass
class CalibrationDiagnostics:
    epsilon: float
    degenerate_fraction: float
    saturated_fraction: float = 0.0
    near_saturated_fraction: float = 0.0
    band_mean_span: list[float] = field(default_factory=list)
    band_degenerate_fraction: list[float] = field(default_factory=list)
    flagged_bands: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def average_frames(frames: Iterable[HyperCube]) -> HyperCube:
    """Element-wise mean of a stack of raw frames.

    Accepts any iterable so long stacks can be streamed without holding
    every frame in memory. The result is a real-valued cube carrying the
    first frame's band map and metadata plus ``frames_averaged``.
    """
    total = None
    first = None
    n = 0
    for frame in frames:
        if first is None:
            first = frame
            total = frame.data.astype(np.float64)
        else:
            if frame.data.shape != first.data.shape:
                raise ShapeMismatch(f"frame {n} has shape {frame.data.shape}, expected {first.data.shape}")
            total += frame.data
        n += 1
    if first is None:
        raise EmptyInput("average_frames needs at least one frame")
    meta = CaptureMeta.from_dict(first.meta.to_dict())
    meta.extra["frames_averaged"] = n
    return HyperCube(Domain.REFLECTANCE, total / n, first.band_map, meta)


def reflectance_arrays(x, dark, white, epsilon: float = DEFAULT_EPSILON):
    """Array-level reflectance on real inputs.

    Returns ``(reflectance, degenerate_mask)`` in float64. This is the path
    used for real-valued inputs that never pass through a raw cube.
    """
    if not epsilon > 0:
        raise NonPositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=np.float64)
    dark = np.asarray(dark, dtype=np.float64)
    white = np.asarray(white, dtype=np.float64)
    if not (x.shape == dark.shape == white.shape):
        raise ShapeMismatch(f"X {x.shape}, dark {dark.shape}, white {white.shape}")
    span = white - dark
    degenerate = ~(span >= epsilon)
    safe = np.where(degenerate, 1.0, span)
    r = np.where(degenerate, 0.0, (x - dark) / safe)
    return r, degenerate


def _band_stats(span: np.ndarray, degenerate: np.ndarray, flag_at: float):
    axes = tuple(range(span.ndim - 1))
    band_span = span.mean(axis=axes) if span.size else np.zeros(span.shape[-1])
    band_deg = degenerate.mean(axis=axes) if span.size else np.zeros(span.shape[-1])
    flagged = [int(k) for k in np.flatnonzero(band_deg >= flag_at)]
    return [float(v) for v in band_span], [float(v) for v in band_deg], flagged


def validate_references(
    refs: ReferencePair, epsilon: float = DEFAULT_EPSILON, flag_at: float = 0.5
) -> CalibrationDiagnostics:
    """Report how much of the white-minus-dark span is unusable.

    Bands where at least ``flag_at`` of the cells are degenerate are listed
    in ``flagged_bands`` (a failed or shadowed white capture).
    """
    if not epsilon > 0:
        raise NonPositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    span = refs.white - refs.dark
    degenerate = ~(span >= epsilon)
    band_span, band_deg, flagged = _band_stats(span, degenerate, flag_at)
    return CalibrationDiagnostics(
        epsilon=float(epsilon),
        degenerate_fraction=float(degenerate.mean()) if degenerate.size else 0.0,
        band_mean_span=band_span,
        band_degenerate_fraction=band_deg,
        flagged_bands=flagged,
    )


def compute_reflectance(
    x: HyperCube, refs: ReferencePair, epsilon: float = DEFAULT_EPSILON
) -> tuple[HyperCube, CalibrationDiagnostics]:
    """Calibrate a raw cube against a reference pair.

    Reflectance is not clamped: specular cells may legitimately exceed 1.
    """
    if x.shape != refs.shape:
        raise ShapeMismatch(f"raw cube {x.shape} vs references {refs.shape}")
    r, degenerate = reflectance_arrays(x.data, refs.dark, refs.white, epsilon)
    raw = x.data
    n = raw.size
    band_span, band_deg, flagged = _band_stats(refs.white - refs.dark, degenerate, 0.5)
    diag = CalibrationDiagnostics(
        epsilon=float(epsilon),
        degenerate_fraction=float(degenerate.sum()) / n if n else 0.0,
        saturated_fraction=float((raw >= FULL_SCALE).sum()) / n if n else 0.0,
        near_saturated_fraction=float((raw >= NEAR_SATURATION).sum()) / n if n else 0.0,
        band_mean_span=band_span,
        band_degenerate_fraction=band_deg,
        flagged_bands=flagged,
    )
    meta = CaptureMeta.from_dict(x.meta.to_dict())
    return HyperCube(Domain.REFLECTANCE, r, x.band_map, meta), diag
