"""Light source and snapshot sensor models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..cube import FULL_SCALE, BandMap
from ..errors import DataError
from .chromophores import table_grid

_FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Quadrature weights so that ``weights @ f`` is the trapezoid integral."""
    grid = np.asarray(grid, dtype=np.float64)
    w = np.zeros_like(grid)
    d = np.diff(grid)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def gaussian(x, center, fwhm):
    sigma = fwhm * _FWHM_TO_SIGMA
    return np.exp(-0.5 * ((np.asarray(x, dtype=np.float64) - center) / sigma) ** 2)


@dataclass(frozen=True)
class LedComponent:
    kind: str  # "gaussian" or "lognormal"
    peak_nm: float
    width: float  # FWHM in nm for gaussian, log-space sigma for lognormal
    weight: float

    def spectrum(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        if self.kind == "gaussian":
            return self.weight * gaussian(lam, self.peak_nm, self.width)
        if self.kind == "lognormal":
            return self.weight * np.exp(-0.5 * (np.log(lam / self.peak_nm) / self.width) ** 2)
        raise DataError(f"unknown LED component kind {self.kind!r}")


def _default_components() -> tuple[LedComponent, ...]:
    return (
        LedComponent("gaussian", 450.0, 22.0, 0.55),  # blue pump of the white LEDs
        LedComponent("lognormal", 575.0, 0.17, 1.0),  # broad phosphor hump
        LedComponent("lognormal", 700.0, 0.12, 0.45),  # red phosphor tail
        LedComponent("gaussian", 910.0, 50.0, 1.6),  # IR LED
        LedComponent("gaussian", 970.0, 40.0, 1.0),  # IR LED
    )


@dataclass(frozen=True)
class IlluminationModel:
    """White phosphor LEDs plus two infrared LEDs.

    The spectral power is normalized so that its maximum on the table grid
    is 1; absolute brightness lives in the sensor gain.
    """

    components: tuple[LedComponent, ...] = field(default_factory=_default_components)
    scale: float = 1.0

    def __post_init__(self):
        peak = self._raw(table_grid()).max()
        if not peak > 0:
            raise DataError("illumination has no power on the table grid")
        object.__setattr__(self, "_norm", 1.0 / peak)

    def _raw(self, lam):
        return sum(c.spectrum(lam) for c in self.components)

    def power(self, wavelength_nm) -> np.ndarray:
        return self.scale * self._norm * self._raw(wavelength_nm)


@dataclass(frozen=True)
class SensorModel:
    """Gaussian channel responses over a CMOS quantum-efficiency curve.

    Counts are ``gain * signal + dark_offset`` plus Poisson shot noise on
    the signal counts and Gaussian read noise, rounded and clamped to
    12 bits.
    """

    band_map: BandMap = field(default_factory=BandMap.default)
    qe_peak: float = 0.75
    qe_peak_nm: float = 525.0
    qe_width_nm: float = 330.0
    gain: float = 7400.0  # counts per unit signal
    read_noise_sigma: float = 2.0
    shot_noise: bool = True
    dark_offset: float = 32.0
    bit_depth: int = 12

    def __post_init__(self):
        if self.bit_depth != 12:
            raise DataError("only 12-bit sensors are modelled")
        if not (0 < self.qe_peak <= 1) or not self.gain > 0 or self.read_noise_sigma < 0:
            raise DataError("invalid sensor parameters")

    @property
    def full_scale(self) -> int:
        return FULL_SCALE

    def qe(self, wavelength_nm) -> np.ndarray:
        lam = np.asarray(wavelength_nm, dtype=np.float64)
        return self.qe_peak * np.exp(-(((lam - self.qe_peak_nm) / self.qe_width_nm) ** 2))

    def responses(self, grid=None) -> np.ndarray:
        """Channel responses on ``grid``, each with unit trapezoid area.

        Shape (bands, len(grid)).
        """
        grid = table_grid() if grid is None else np.asarray(grid, dtype=np.float64)
        centers, fwhm = self.band_map.as_arrays()
        resp = gaussian(grid[None, :], centers[:, None], fwhm[:, None])
        area = resp @ trapezoid_weights(grid)
        return resp / area[:, None]


@dataclass(frozen=True)
class SignalWeights:
    """Precomputed quadrature of E(l) qe(l) response_c(l) on the table grid.

    ``signal = spectrum @ matrix.T`` gives the per-channel radiant signal
    of a reflectance spectrum sampled on ``grid``.
    """

    grid: np.ndarray
    matrix: np.ndarray  # (bands, grid)

    @classmethod
    def build(cls, sensor: SensorModel, light: IlluminationModel, grid=None) -> "SignalWeights":
        grid = table_grid() if grid is None else np.asarray(grid, dtype=np.float64)
        w = sensor.responses(grid) * trapezoid_weights(grid)[None, :]
        w = w * (light.power(grid) * sensor.qe(grid))[None, :]
        return cls(grid, w)

    def signal(self, spectra: np.ndarray) -> np.ndarray:
        return np.asarray(spectra) @ self.matrix.T

    @property
    def white_signal(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def band_average(self, spectra: np.ndarray) -> np.ndarray:
        """Illumination- and QE-weighted band average of reflectance."""
        white = self.white_signal
        if np.any(white <= 0):
            raise DataError("a channel receives no light; band average undefined")
        return self.signal(spectra) / white

    def averaging_matrix(self) -> np.ndarray:
        return self.matrix / self.white_signal[:, None]
