"""Phantom skin scenes and the snapshot raw-count renderer.

Scene JSON schema::

    {
      "rows": 290, "cols": 275,
      "background": {"melanin_fraction": 0.02, ...},
      "lesions": [
        {"shape": "disc" | "annulus", "center": [row, col], "radius": px,
         "inner_radius": px (annulus only), "params": {...},
         "pattern": "Globular" (optional), "histology": "Compound" (optional)}
      ],
      "meta": {"patient_id": "...", "body_part": "Arms", ...}
    }

Parameter objects may be partial; missing keys take the
``SkinOpticsParams`` defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ..cube import DEFAULT_RESOLUTION, CaptureMeta, Domain, HyperCube
from ..errors import ConfigError, DataError, GeometryOutOfFrame
from ..labels import Histology, Pattern
from .chromophores import load_tables
from .instrument import IlluminationModel, SensorModel, SignalWeights
from .optics import PARAM_NAMES, SkinOpticsParams, skin_spectrum

# RNG stream ids; each (stream, frame, row) triple owns a Philox substream.
STREAM_RAW = 0
STREAM_DARK = 1
STREAM_WHITE = 2

SHAPES = ("disc", "annulus")
_LESION_KEYS = {"shape", "center", "radius", "inner_radius", "params", "pattern", "histology"}
_SCENE_KEYS = {"rows", "cols", "background", "lesions", "meta"}


def _params_from(d, where: str) -> SkinOpticsParams:
    if isinstance(d, SkinOpticsParams):
        return d
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object of skin parameters")
    try:
        return SkinOpticsParams.from_dict(d)
    except (DataError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class Lesion:
    center: tuple[float, float]  # (row, col) in pixels
    radius: float
    params: SkinOpticsParams
    shape: str = "disc"
    inner_radius: float = 0.0
    pattern: Pattern | None = None
    histology: Histology | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"lesion shape must be one of {SHAPES}, got {self.shape!r}")
        self.center = (float(self.center[0]), float(self.center[1]))
        self.radius = float(self.radius)
        self.inner_radius = float(self.inner_radius)
        if not self.radius > 0:
            raise ConfigError("lesion radius must be positive")
        if self.shape == "annulus" and not 0 < self.inner_radius < self.radius:
            raise ConfigError("annulus needs 0 < inner_radius < radius")
        self.pattern = Pattern(self.pattern) if self.pattern is not None else None
        self.histology = Histology(self.histology) if self.histology is not None else None

    def mask(self, rows: int, cols: int) -> np.ndarray:
        r = _radius_map(rows, cols, self.center)
        m = r <= self.radius
        if self.shape == "annulus":
            m &= r >= self.inner_radius
        return m

    def melanin_map(self, rows: int, cols: int) -> np.ndarray:
        """Melanin fraction over the frame, shaped by the dermoscopic pattern."""
        base = self.params.melanin_fraction
        return np.clip(base * _pattern_factor(self.pattern, rows, cols, self.center, self.radius), 0.0, 1.0)

    def to_dict(self) -> dict:
        d = {
            "shape": self.shape,
            "center": list(self.center),
            "radius": self.radius,
            "params": self.params.to_dict(),
        }
        if self.shape == "annulus":
            d["inner_radius"] = self.inner_radius
        if self.pattern is not None:
            d["pattern"] = self.pattern.value
        if self.histology is not None:
            d["histology"] = self.histology.value
        return d

    @classmethod
    def from_dict(cls, d: dict, where: str = "lesion") -> "Lesion":
        unknown = set(d) - _LESION_KEYS
        if unknown:
            raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
        for key in ("center", "radius"):
            if key not in d:
                raise ConfigError(f"{where}: missing {key!r}")
        try:
            return cls(
                center=tuple(d["center"]),
                radius=d["radius"],
                params=_params_from(d.get("params", {}), where),
                shape=d.get("shape", "disc"),
                inner_radius=d.get("inner_radius", 0.0),
                pattern=d.get("pattern"),
                histology=d.get("histology"),
            )
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{where}: {exc}") from exc


def _radius_map(rows, cols, center):
    rr, cc = np.mgrid[0:rows, 0:cols]
    return np.hypot(rr - center[0], cc - center[1])


def _pattern_factor(pattern, rows, cols, center, radius) -> np.ndarray:
    """Multiplicative melanin modulation, 1 for a homogeneous lesion.

    The maps are deterministic and take only a handful of levels.
    """
    rr, cc = np.mgrid[0:rows, 0:cols].astype(np.float64)
    dr, dc = rr - center[0], cc - center[1]
    rho = np.hypot(dr, dc) / radius
    period = max(radius / 3.0, 3.0)
    if pattern is None or pattern is Pattern.HOMOGENEOUS_BROWN:
        return np.ones((rows, cols))
    if pattern is Pattern.DIFFUSE_RETICULAR:
        # pigmented lines of a net over lighter holes
        lines = (np.abs(np.sin(np.pi * dr / period)) < 0.35) | (np.abs(np.sin(np.pi * dc / period)) < 0.35)
        return np.where(lines, 1.3, 0.8)
    if pattern is Pattern.PERIPHERAL_NETWORK_CENTRAL_HYPOPIGMENTATION:
        lines = (np.abs(np.sin(np.pi * dr / period)) < 0.35) | (np.abs(np.sin(np.pi * dc / period)) < 0.35)
        rim = np.where(lines, 1.3, 0.8)
        return np.where(rho < 0.5, 0.5, rim)
    if pattern is Pattern.GLOBULAR:
        gr = dr - period * np.round(dr / period)
        gc = dc - period * np.round(dc / period)
        globule = np.hypot(gr, gc) < 0.3 * period
        return np.where(globule, 1.5, 0.7)
    if pattern is Pattern.FRIED_EGG:
        # dark raised centre ("yolk") inside a lighter flat rim
        return np.where(rho < 0.45, 1.4, 0.6)
    raise DataError(f"unhandled pattern {pattern!r}")


@dataclass
class PhantomScene:
    rows: int = DEFAULT_RESOLUTION[0]
    cols: int = DEFAULT_RESOLUTION[1]
    background: SkinOpticsParams = field(default_factory=SkinOpticsParams)
    lesions: list[Lesion] = field(default_factory=list)
    meta: CaptureMeta = field(default_factory=CaptureMeta)

    def __post_init__(self):
        self.rows, self.cols = int(self.rows), int(self.cols)
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("scene needs at least one row and one column")

    def validate(self) -> None:
        for i, les in enumerate(self.lesions):
            r0, c0 = les.center
            if (
                r0 - les.radius < 0
                or c0 - les.radius < 0
                or r0 + les.radius > self.rows - 1
                or c0 + les.radius > self.cols - 1
            ):
                raise GeometryOutOfFrame(
                    f"lesion {i} (center {les.center}, radius {les.radius}) leaves the "
                    f"{self.rows}x{self.cols} frame"
                )

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "background": self.background.to_dict(),
            "lesions": [les.to_dict() for les in self.lesions],
            "meta": self.meta.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomScene":
        if not isinstance(d, dict):
            raise ConfigError("scene document must be a JSON object")
        unknown = set(d) - _SCENE_KEYS
        if unknown:
            raise ConfigError(f"scene: unknown key(s) {sorted(unknown)}")
        lesions = d.get("lesions", [])
        if not isinstance(lesions, list):
            raise ConfigError("scene: 'lesions' must be a list")
        try:
            meta = CaptureMeta.from_dict(d.get("meta", {}))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"scene meta: {exc}") from exc
        return cls(
            rows=d.get("rows", DEFAULT_RESOLUTION[0]),
            cols=d.get("cols", DEFAULT_RESOLUTION[1]),
            background=_params_from(d.get("background", {}), "background"),
            lesions=[Lesion.from_dict(x, f"lesions[{i}]") for i, x in enumerate(lesions)],
            meta=meta,
        )

    @classmethod
    def uniform(cls, rows: int, cols: int, params: SkinOpticsParams | None = None) -> "PhantomScene":
        return cls(rows, cols, params or SkinOpticsParams())

    @classmethod
    def single_lesion(cls, rows: int = DEFAULT_RESOLUTION[0], cols: int = DEFAULT_RESOLUTION[1],
                      melanin: float = 0.2, radius: float | None = None) -> "PhantomScene":
        """Skin background with one homogeneous lesion disc at the centre."""
        bg = SkinOpticsParams()
        radius = radius if radius is not None else 0.25 * min(rows, cols)
        les = Lesion(((rows - 1) / 2, (cols - 1) / 2), radius, bg.replace(melanin_fraction=melanin),
                     pattern=Pattern.HOMOGENEOUS_BROWN)
        return cls(rows, cols, bg, [les])


@dataclass
class GroundTruth:
    params: np.ndarray  # (rows, cols, 6), columns ordered as PARAM_NAMES
    class_mask: np.ndarray  # bool, True on lesion pixels
    lesion_index: np.ndarray  # int16, 0 for background, i+1 for lesion i
    reflectance: np.ndarray  # (rows, cols, bands) band-averaged true reflectance

    def summary(self) -> dict:
        """Per-region band-averaged reflectance and parameter means for the sidecar."""
        regions = {}
        for idx in np.unique(self.lesion_index):
            sel = self.lesion_index == idx
            name = "background" if idx == 0 else f"lesion_{idx - 1}"
            regions[name] = {
                "pixels": int(sel.sum()),
                "mean_params": dict(zip(PARAM_NAMES, (float(v) for v in self.params[sel].mean(axis=0)))),
                "mean_reflectance": [float(v) for v in self.reflectance[sel].mean(axis=0)],
            }
        return {"param_names": list(PARAM_NAMES), "regions": regions}


def scene_param_map(scene: PhantomScene):
    """Per-pixel parameter vectors plus the lesion index map."""
    scene.validate()
    rows, cols = scene.rows, scene.cols
    params = np.broadcast_to(scene.background.as_vector(), (rows, cols, len(PARAM_NAMES))).copy()
    index = np.zeros((rows, cols), dtype=np.int16)
    for i, les in enumerate(scene.lesions):
        m = les.mask(rows, cols)
        params[m] = les.params.as_vector()
        params[m, 0] = les.melanin_map(rows, cols)[m]
        index[m] = i + 1
    return params, index


def row_generator(seed: int, stream: int, frame: int, row: int) -> np.random.Generator:
    """Counter-based generator for one sensor row of one exposure."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(frame), int(row)))
    return np.random.Generator(np.random.Philox(ss))


def expose(mean_counts: np.ndarray, sensor: SensorModel, noise: bool, seed: int, stream: int,
           frame: int = 0) -> np.ndarray:
    """Turn expected signal counts (rows, cols, bands) into one 12-bit raw frame."""
    if not noise:
        return np.clip(np.rint(mean_counts + sensor.dark_offset), 0, sensor.full_scale).astype(np.uint16)
    out = np.empty(mean_counts.shape, dtype=np.uint16)
    for r in range(mean_counts.shape[0]):
        rng = row_generator(seed, stream, frame, r)
        lam = mean_counts[r]
        electrons = rng.poisson(lam) if sensor.shot_noise else lam
        counts = electrons + sensor.dark_offset + rng.normal(0.0, sensor.read_noise_sigma, lam.shape)
        out[r] = np.clip(np.rint(counts), 0, sensor.full_scale)
    return out


def predicted_variance(mean_counts, sensor: SensorModel):
    """Variance of a noisy count: shot + read + uniform rounding."""
    shot = np.asarray(mean_counts, dtype=np.float64) if sensor.shot_noise else 0.0
    return shot + sensor.read_noise_sigma**2 + 1.0 / 12.0


@dataclass
class Renderer:
    """Caches the quadrature weights for one sensor/illumination pair."""

    sensor: SensorModel = field(default_factory=SensorModel)
    light: IlluminationModel = field(default_factory=IlluminationModel)

    def __post_init__(self):
        self.weights = SignalWeights.build(self.sensor, self.light)

    def mean_counts(self, scene: PhantomScene):
        """Expected (noise-free, unrounded) signal counts and the ground truth."""
        params, index = scene_param_map(scene)
        flat = params.reshape(-1, params.shape[-1])
        uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
        tables = load_tables()
        spectra = np.stack([skin_spectrum(SkinOpticsParams.from_vector(v), tables.wavelengths, tables)
                            for v in uniq])
        signal = self.sensor.gain * self.weights.signal(spectra)
        truth_r = self.weights.band_average(spectra)
        inverse = inverse.ravel()
        shape = (scene.rows, scene.cols, self.sensor.band_map.channel_count)
        truth = GroundTruth(params, index > 0, index, truth_r[inverse].reshape(shape))
        return signal[inverse].reshape(shape), truth

    def uniform_counts(self, rows: int, cols: int, reflectance: float) -> np.ndarray:
        sig = self.sensor.gain * self.weights.white_signal * reflectance
        return np.broadcast_to(sig, (rows, cols, sig.size)).copy()

    def render(self, scene: PhantomScene, noise: bool = True, seed: int = 0, frame: int = 0):
        mean, truth = self.mean_counts(scene)
        data = expose(mean, self.sensor, noise, seed, STREAM_RAW, frame)
        meta = CaptureMeta.from_dict(scene.meta.to_dict())
        return HyperCube(Domain.RAW_COUNTS, data, self.sensor.band_map, meta), truth

    def reference_frames(self, role: str, rows: int, cols: int, frames: int, noise: bool = True,
                         seed: int = 0, meta: CaptureMeta | None = None) -> Iterator[HyperCube]:
        """Lazily yield ``frames`` dark (light off) or white (unit target) exposures."""
        if role == "dark":
            # light source off: no signal, only offset and read noise
            stream, refl = STREAM_DARK, 0.0
        elif role == "white":
            stream, refl = STREAM_WHITE, 1.0
        else:
            raise ConfigError(f"reference role must be 'dark' or 'white', got {role!r}")
        if frames < 1:
            raise ConfigError("need at least one reference frame")
        mean = self.uniform_counts(rows, cols, refl)
        base = (meta or CaptureMeta()).to_dict()
        base["reference_role"] = role
        for f in range(frames):
            data = expose(mean, self.sensor, noise, seed, stream, f)
            yield HyperCube(Domain.RAW_COUNTS, data, self.sensor.band_map, CaptureMeta.from_dict(base))


def render_scene(scene: PhantomScene, sensor: SensorModel | None = None,
                 light: IlluminationModel | None = None, noise: bool = True, seed: int = 0):
    """Render one snapshot exposure of ``scene``.

    Returns
    -------
    (HyperCube, GroundTruth)
        Raw 12-bit counts and the per-pixel truth (parameters, class mask,
        band-averaged reflectance).
    """
    return Renderer(sensor or SensorModel(), light or IlluminationModel()).render(scene, noise, seed)


def render_references(rows: int, cols: int, sensor: SensorModel | None = None,
                      light: IlluminationModel | None = None, frames: int = 100,
                      noise: bool = True, seed: int = 0, meta: CaptureMeta | None = None):
    """Mean dark and white reference cubes, each averaged over ``frames`` exposures."""
    from ..calib import average_frames

    ren = Renderer(sensor or SensorModel(), light or IlluminationModel())
    out = []
    for role in ("dark", "white"):
        cube = average_frames(ren.reference_frames(role, rows, cols, frames, noise, seed, meta))
        out.append(cube)
    return tuple(out)
