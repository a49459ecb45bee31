"""Absorption spectra of the skin chromophores on a 2 nm grid.

Hemoglobin extinction comes from the Gratzer/Kollias compilation, water
absorption from Hale & Querry (resampled with a shape-preserving cubic),
melanin from the usual lambda^-3.33 power law.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..errors import WavelengthOutOfRange

GRID_START_NM = 400.0
GRID_STOP_NM = 1000.0
GRID_STEP_NM = 2.0

HEMOGLOBIN_G_PER_L = 150.0  # whole blood
HEMOGLOBIN_G_PER_MOL = 64500.0
MELANIN_EXPONENT = 3.33
# mua_mel = 6.6e11 * lambda^-3.33 [1/cm] evaluated at 500 nm, in 1/mm
MELANIN_MUA_500 = 6.6e11 * 500.0 ** -MELANIN_EXPONENT / 10.0


def table_grid() -> np.ndarray:
    n = int(round((GRID_STOP_NM - GRID_START_NM) / GRID_STEP_NM)) + 1
    return GRID_START_NM + GRID_STEP_NM * np.arange(n)


def _load_csv(name: str) -> np.ndarray:
    text = (resources.files("hyperderm.skinsim") / "data" / name).read_text()
    return np.loadtxt(text.splitlines(), delimiter=",", comments="#", ndmin=2)


def melanin_mua(wavelength_nm) -> np.ndarray:
    """Melanin absorption at unit volume fraction, 1/mm."""
    lam = np.asarray(wavelength_nm, dtype=np.float64)
    return MELANIN_MUA_500 * (lam / 500.0) ** -MELANIN_EXPONENT


@dataclass(frozen=True)
class ChromophoreTables:
    """Absorption coefficients (1/mm) at unit volume fraction.

    Hemoglobin entries are for whole blood, so ``blood_fraction`` scales
    them directly.
    """

    wavelengths: np.ndarray
    oxyhemoglobin: np.ndarray
    deoxyhemoglobin: np.ndarray
    water: np.ndarray
    melanin: np.ndarray

    def at(self, wavelength_nm) -> dict[str, np.ndarray]:
        lam = np.asarray(wavelength_nm, dtype=np.float64)
        lo, hi = self.wavelengths[0], self.wavelengths[-1]
        if np.any(~np.isfinite(lam)) or np.any(lam < lo) or np.any(lam > hi):
            raise WavelengthOutOfRange(f"wavelengths must lie in [{lo:g}, {hi:g}] nm")
        if lam.shape == self.wavelengths.shape and np.array_equal(lam, self.wavelengths):
            return {
                "oxyhemoglobin": self.oxyhemoglobin,
                "deoxyhemoglobin": self.deoxyhemoglobin,
                "water": self.water,
                "melanin": self.melanin,
            }
        return {
            "oxyhemoglobin": np.interp(lam, self.wavelengths, self.oxyhemoglobin),
            "deoxyhemoglobin": np.interp(lam, self.wavelengths, self.deoxyhemoglobin),
            "water": np.interp(lam, self.wavelengths, self.water),
            "melanin": melanin_mua(lam),
        }


@lru_cache(maxsize=1)
def load_tables() -> ChromophoreTables:
    grid = table_grid()
    hb = _load_csv("hemoglobin.csv")
    # molar extinction (base 10, cm^-1/M) -> absorption coefficient, 1/mm
    per_molar = np.log(10) * HEMOGLOBIN_G_PER_L / HEMOGLOBIN_G_PER_MOL / 10.0
    hbo2 = np.interp(grid, hb[:, 0], hb[:, 1]) * per_molar
    hhb = np.interp(grid, hb[:, 0], hb[:, 2]) * per_molar
    water_knots = _load_csv("water.csv")
    water = PchipInterpolator(water_knots[:, 0], water_knots[:, 1] / 10.0)(grid)
    tables = ChromophoreTables(grid, hbo2, hhb, water, melanin_mua(grid))
    for arr in (tables.oxyhemoglobin, tables.deoxyhemoglobin, tables.water, tables.melanin):
        arr.setflags(write=False)
    return tables
