"""Bounded least-squares inversion of a band-grid spectrum to skin parameters.

The dermal reflectance depends on absorption and scattering only through
their ratio, so blood, water and scatter amplitude cannot all be recovered
at once. The amplitude is therefore held at its initial value unless the
caller frees it explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..errors import BoundsInverted, DataError, NonFiniteInput
from .chromophores import ChromophoreTables, load_tables
from .instrument import IlluminationModel, SensorModel, SignalWeights
from .optics import EPIDERMIS_MM, PARAM_NAMES, SkinOpticsParams, skin_spectrum_jacobian

MIN_BANDS = 10
DEFAULT_FREE = ("melanin_fraction", "blood_fraction", "oxygenation", "water_fraction", "scatter_power")


@dataclass(frozen=True)
class FitBounds:
    lower: SkinOpticsParams = field(
        default_factory=lambda: SkinOpticsParams(0.0, 0.0, 0.0, 0.0, 0.5, 0.2)
    )
    upper: SkinOpticsParams = field(
        default_factory=lambda: SkinOpticsParams(1.0, 1.0, 1.0, 1.0, 20.0, 4.0)
    )

    def __post_init__(self):
        lo, hi = self.lower.as_vector(), self.upper.as_vector()
        bad = [n for n, a, b in zip(PARAM_NAMES, lo, hi) if a > b]
        if bad:
            raise BoundsInverted(f"lower bound exceeds upper bound for {bad}")

    def arrays(self):
        return self.lower.as_vector(), self.upper.as_vector()


@dataclass
class FitResult:
    params: SkinOpticsParams
    residual: float  # sum of squared band residuals
    iterations: int
    success: bool
    message: str
    free: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "residual": self.residual,
            "iterations": self.iterations,
            "success": self.success,
            "message": self.message,
            "free": list(self.free),
        }


class BandModel:
    """Forward model from parameters to band-averaged reflectance."""

    def __init__(self, weights: SignalWeights | None = None, tables: ChromophoreTables | None = None,
                 epidermis_mm: float | None = EPIDERMIS_MM):
        self.weights = weights or SignalWeights.build(SensorModel(), IlluminationModel())
        self.tables = tables or load_tables()
        self.epidermis_mm = epidermis_mm
        self._avg = self.weights.averaging_matrix()

    @property
    def bands(self) -> int:
        return self._avg.shape[0]

    def __call__(self, p: SkinOpticsParams) -> np.ndarray:
        return self.evaluate(p)[0]

    def evaluate(self, p: SkinOpticsParams):
        spec, jac = skin_spectrum_jacobian(p, self.weights.grid, self.tables, self.epidermis_mm)
        return self._avg @ spec, self._avg @ jac


def fit_chromophores(measured, init: SkinOpticsParams | None = None, bounds: FitBounds | None = None,
                     model: BandModel | None = None, free=DEFAULT_FREE) -> FitResult:
    """Fit skin parameters to a measured band spectrum.

    Uses a trust-region reflective solver with the analytic Jacobian, so
    the result is deterministic for a fixed ``init``.

    Parameters
    ----------
    measured : array_like
        Reflectance per band, same grid as ``model``.
    init : SkinOpticsParams, optional
        Starting point; clipped into ``bounds``. Parameters not listed in
        ``free`` stay at their ``init`` values.
    bounds : FitBounds, optional
    model : BandModel, optional
        Defaults to the standard sensor and illumination.
    free : sequence of str
        Names of the parameters to optimize.

    Returns
    -------
    FitResult
    """
    y = np.asarray(measured, dtype=np.float64).ravel()
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("measured spectrum contains NaN or Inf")
    if y.size < MIN_BANDS:
        raise DataError(f"need at least {MIN_BANDS} bands, got {y.size}")
    bounds = bounds or FitBounds()
    model = model or BandModel()
    if y.size != model.bands:
        raise DataError(f"spectrum has {y.size} bands, model has {model.bands}")
    free = tuple(free)
    unknown = set(free) - set(PARAM_NAMES)
    if unknown or not free:
        raise DataError(f"invalid free parameter set {free}")
    idx = np.array([PARAM_NAMES.index(n) for n in free])

    lo, hi = bounds.arrays()
    full = np.clip((init or SkinOpticsParams()).as_vector(), lo, hi)

    def unpack(x):
        v = full.copy()
        v[idx] = x
        return SkinOpticsParams.from_vector(np.clip(v, lo, hi))

    def residuals(x):
        return model(unpack(x)) - y

    def jacobian(x):
        return model.evaluate(unpack(x))[1][:, idx]

    res = least_squares(
        residuals, full[idx], jac=jacobian, bounds=(lo[idx], hi[idx]), method="trf",
        x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
    )
    params = unpack(res.x)
    r = residuals(res.x)
    return FitResult(params, float(r @ r), int(res.nfev), bool(res.success), str(res.message), free)
