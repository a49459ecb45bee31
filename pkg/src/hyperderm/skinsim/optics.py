"""Tissue optics: absorption, scattering and diffuse reflectance of skin.

The dermis is a semi-infinite turbid medium whose total diffuse
reflectance follows the closed form of Farrell, Patterson & Wilson (1992)::

    a' = mus' / (mua + mus')
    R  = (a'/2) (1 + exp(-(4/3) A sqrt(3 (1 - a')))) exp(-sqrt(3 (1 - a')))

Melanin sits in a thin epidermal layer on top and attenuates the light
twice (in and out), so a skin spectrum is ``T_epi**2 * R_dermis``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from ..errors import DataError, NonPositiveScattering
from .chromophores import ChromophoreTables, load_tables

# Contact geometry: tissue (n=1.40) pressed against a glass plate (n=1.52).
N_TISSUE = 1.40
N_GLASS = 1.52
EPIDERMIS_MM = 0.03  # effective melanin-bearing path, single pass


def internal_reflection(n_rel: float) -> float:
    """Diffuse internal reflectance of a boundary with index ratio ``n_rel``.

    Polynomial fits of Egan & Hilgeman (n_rel < 1) and Groenhuis (n_rel >= 1).
    """
    n = n_rel
    if n < 1.0:
        return -0.4399 + 0.7099 / n - 0.3319 / n**2 + 0.0636 / n**3
    return -1.440 / n**2 + 0.710 / n + 0.668 + 0.0636 * n


R_INTERNAL = internal_reflection(N_TISSUE / N_GLASS)
A_BOUNDARY = (1.0 + R_INTERNAL) / (1.0 - R_INTERNAL)

PARAM_NAMES = (
    "melanin_fraction",
    "blood_fraction",
    "oxygenation",
    "water_fraction",
    "scatter_amplitude",
    "scatter_power",
)
_FRACTIONS = PARAM_NAMES[:4]


@dataclass(frozen=True)
class SkinOpticsParams:
    melanin_fraction: float = 0.02
    blood_fraction: float = 0.02
    oxygenation: float = 0.7
    water_fraction: float = 0.65
    scatter_amplitude: float = 4.6  # 1/mm at 500 nm
    scatter_power: float = 1.421

    def __post_init__(self):
        for name in PARAM_NAMES:
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in _FRACTIONS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must lie in [0, 1], got {v}")
        if not self.scatter_amplitude > 0 or not self.scatter_power > 0:
            raise DataError("scatter amplitude and power must be positive")

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES])

    @classmethod
    def from_vector(cls, v) -> "SkinOpticsParams":
        return cls(*(float(x) for x in v))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SkinOpticsParams":
        unknown = set(d) - set(PARAM_NAMES)
        if unknown:
            raise DataError(f"unknown skin parameter(s): {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "SkinOpticsParams":
        return replace(self, **changes)


def total_absorption(wavelength_nm, p: SkinOpticsParams, tables: ChromophoreTables | None = None):
    """Bulk absorption coefficient (1/mm), linear in every volume fraction."""
    mu = (tables or load_tables()).at(wavelength_nm)
    blood = p.oxygenation * mu["oxyhemoglobin"] + (1.0 - p.oxygenation) * mu["deoxyhemoglobin"]
    return (
        p.melanin_fraction * mu["melanin"]
        + p.blood_fraction * blood
        + p.water_fraction * mu["water"]
    )


def reduced_scattering(wavelength_nm, p: SkinOpticsParams):
    lam = np.asarray(wavelength_nm, dtype=np.float64)
    if np.any(lam <= 0):
        raise DataError("wavelength must be positive")
    return p.scatter_amplitude * (lam / 500.0) ** -p.scatter_power


def _check_optical(mua, musp):
    mua = np.asarray(mua, dtype=np.float64)
    musp = np.asarray(musp, dtype=np.float64)
    if np.any(~(musp > 0)):
        raise NonPositiveScattering("reduced scattering must be positive")
    if np.any(~(mua >= 0)):
        raise DataError("absorption must be non-negative")
    return mua, musp


def diffuse_reflectance(mua, musp):
    mua, musp = _check_optical(mua, musp)
    u = np.sqrt(3.0 * mua / (mua + musp))
    albedo = musp / (mua + musp)
    return 0.5 * albedo * (1.0 + np.exp(-4.0 / 3.0 * A_BOUNDARY * u)) * np.exp(-u)


def diffuse_reflectance_partials(mua, musp):
    """Reflectance with its partial derivatives in ``mua`` and ``musp``.

    The derivative in ``mua`` diverges like ``mua**-0.5`` at zero
    absorption; it is evaluated with ``u`` floored at 1e-12.
    """
    mua, musp = _check_optical(mua, musp)
    s = mua + musp
    albedo = musp / s
    u = np.sqrt(3.0 * mua / s)
    k = 4.0 / 3.0 * A_BOUNDARY
    ek, eu = np.exp(-k * u), np.exp(-u)
    r = 0.5 * albedo * (1.0 + ek) * eu
    dr_dalbedo = 0.5 * (1.0 + ek) * eu - 0.5 * albedo * eu * (k * ek + 1.0 + ek) * (-1.5 / np.maximum(u, 1e-12))
    dalbedo_dmua = -musp / s**2
    dalbedo_dmusp = mua / s**2
    return r, dr_dalbedo * dalbedo_dmua, dr_dalbedo * dalbedo_dmusp


def epidermal_transmission(wavelength_nm, p: SkinOpticsParams, epidermis_mm: float = EPIDERMIS_MM,
                           tables: ChromophoreTables | None = None):
    """Single-pass Beer-Lambert transmission of the melanin layer."""
    mel = (tables or load_tables()).at(wavelength_nm)["melanin"]
    return np.exp(-p.melanin_fraction * mel * epidermis_mm)


def skin_spectrum(p: SkinOpticsParams, wavelengths_nm, tables: ChromophoreTables | None = None,
                  epidermis_mm: float | None = EPIDERMIS_MM) -> np.ndarray:
    """Diffuse reflectance spectrum of skin.

    With ``epidermis_mm=None`` melanin is mixed into the bulk and the
    spectrum is ``diffuse_reflectance(total_absorption, reduced_scattering)``.
    Otherwise melanin is confined to an epidermal filter of that thickness
    over a melanin-free dermis.
    """
    tables = tables or load_tables()
    musp = reduced_scattering(wavelengths_nm, p)
    if epidermis_mm is None:
        return diffuse_reflectance(total_absorption(wavelengths_nm, p, tables), musp)
    dermis = p.replace(melanin_fraction=0.0)
    t = epidermal_transmission(wavelengths_nm, p, epidermis_mm, tables)
    return t**2 * diffuse_reflectance(total_absorption(wavelengths_nm, dermis, tables), musp)


def skin_spectrum_jacobian(p: SkinOpticsParams, wavelengths_nm, tables: ChromophoreTables | None = None,
                           epidermis_mm: float | None = EPIDERMIS_MM):
    """Spectrum and its analytic derivative in each parameter.

    Returns ``(spectrum, jac)`` with ``jac`` of shape (n_wavelengths, 6),
    columns ordered as ``PARAM_NAMES``.
    """
    tables = tables or load_tables()
    lam = np.asarray(wavelengths_nm, dtype=np.float64)
    mu = tables.at(lam)
    blood_mu = p.oxygenation * mu["oxyhemoglobin"] + (1.0 - p.oxygenation) * mu["deoxyhemoglobin"]
    layered = epidermis_mm is not None
    bulk_mel = 0.0 if layered else p.melanin_fraction
    mua = bulk_mel * mu["melanin"] + p.blood_fraction * blood_mu + p.water_fraction * mu["water"]
    scale = (lam / 500.0) ** -p.scatter_power
    musp = p.scatter_amplitude * scale
    rd, d_mua, d_musp = diffuse_reflectance_partials(mua, musp)

    jac = np.empty(lam.shape + (6,))
    if layered:
        t2 = np.exp(-2.0 * p.melanin_fraction * mu["melanin"] * epidermis_mm)
        spectrum = t2 * rd
        jac[..., 0] = -2.0 * mu["melanin"] * epidermis_mm * spectrum
    else:
        t2 = np.ones_like(rd)
        spectrum = rd
        jac[..., 0] = d_mua * mu["melanin"]
    jac[..., 1] = t2 * d_mua * blood_mu
    jac[..., 2] = t2 * d_mua * p.blood_fraction * (mu["oxyhemoglobin"] - mu["deoxyhemoglobin"])
    jac[..., 3] = t2 * d_mua * mu["water"]
    jac[..., 4] = t2 * d_musp * scale
    jac[..., 5] = t2 * d_musp * musp * -np.log(lam / 500.0)
    return spectrum, jac
