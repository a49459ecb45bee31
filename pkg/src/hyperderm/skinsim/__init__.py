"""Physics-based synthetic skin scenes and the raw sensor model."""

from .chromophores import ChromophoreTables, load_tables, melanin_mua
from .optics import (
    PARAM_NAMES,
    SkinOpticsParams,
    diffuse_reflectance,
    reduced_scattering,
    skin_spectrum,
    total_absorption,
)

__all__ = [
    "ChromophoreTables",
    "PARAM_NAMES",
    "SkinOpticsParams",
    "diffuse_reflectance",
    "load_tables",
    "melanin_mua",
    "reduced_scattering",
    "skin_spectrum",
    "total_absorption",
]
