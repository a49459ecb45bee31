import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperderm.errors import DataError, NonPositiveScattering, WavelengthOutOfRange
from hyperderm.skinsim.chromophores import load_tables, table_grid
from hyperderm.skinsim.optics import (
    A_BOUNDARY,
    PARAM_NAMES,
    R_INTERNAL,
    SkinOpticsParams,
    diffuse_reflectance,
    diffuse_reflectance_partials,
    reduced_scattering,
    skin_spectrum,
    skin_spectrum_jacobian,
    total_absorption,
)
from oracles import central_difference, diffusion_to_two_flux, kubelka_munk_infinite, two_flux_slab

ZERO = SkinOpticsParams(0.0, 0.0, 0.5, 0.0)


class TestAbsorption:
    def test_zero_fractions(self):
        assert np.all(total_absorption(table_grid(), ZERO) == 0.0)

    def test_linear_in_melanin(self):
        lam = table_grid()
        one = total_absorption(lam, ZERO.replace(melanin_fraction=0.1))
        two = total_absorption(lam, ZERO.replace(melanin_fraction=0.2))
        assert np.allclose(two, 2 * one, rtol=1e-15)

    def test_oxy_blood_peak(self):
        lam = np.arange(500.0, 601.0, 2.0)
        mua = total_absorption(lam, ZERO.replace(blood_fraction=0.05, oxygenation=1.0))
        peak = lam[np.argmax(mua)]
        assert min(abs(peak - 540), abs(peak - 575)) <= 5

    def test_composition(self):
        t = load_tables()
        p = SkinOpticsParams(0.1, 0.03, 0.6, 0.5)
        k = 120
        expect = (0.1 * t.melanin[k] + 0.03 * (0.6 * t.oxyhemoglobin[k] + 0.4 * t.deoxyhemoglobin[k])
                  + 0.5 * t.water[k])
        assert total_absorption(t.wavelengths, p)[k] == pytest.approx(expect, rel=1e-14)

    def test_range(self):
        with pytest.raises(WavelengthOutOfRange):
            total_absorption(1200.0, SkinOpticsParams())


class TestScattering:
    def test_reference_point(self):
        assert reduced_scattering(500.0, SkinOpticsParams(scatter_amplitude=3.7)) == 3.7

    def test_half_at_1000(self):
        p = SkinOpticsParams(scatter_amplitude=2.0, scatter_power=1.0)
        assert reduced_scattering(1000.0, p) == 1.0

    def test_closed_form(self):
        p = SkinOpticsParams(scatter_amplitude=2.0, scatter_power=1.3)
        assert reduced_scattering(700.0, p) == pytest.approx(2.0 * 1.4**-1.3, rel=1e-14)

    def test_decreasing(self):
        assert np.all(np.diff(reduced_scattering(table_grid(), SkinOpticsParams())) < 0)


class TestParams:
    @pytest.mark.parametrize("field", PARAM_NAMES[:4])
    def test_fraction_bounds(self, field):
        with pytest.raises(DataError):
            SkinOpticsParams(**{field: 1.5})

    def test_scatter_positive(self):
        with pytest.raises(DataError):
            SkinOpticsParams(scatter_power=0.0)

    def test_dict_round_trip(self):
        p = SkinOpticsParams(0.1, 0.2, 0.3, 0.4, 5.0, 1.1)
        assert SkinOpticsParams.from_dict(p.to_dict()) == p
        assert SkinOpticsParams.from_vector(p.as_vector()) == p
        with pytest.raises(DataError):
            SkinOpticsParams.from_dict({"melanin": 0.1})


class TestDiffuseReflectance:
    def test_no_absorption(self):
        assert diffuse_reflectance(0.0, 2.0) == 1.0

    def test_boundary_constant(self):
        # tissue on glass, n = 1.40 / 1.52
        assert R_INTERNAL == pytest.approx(0.021, abs=1e-3)
        assert A_BOUNDARY == pytest.approx(1.043, abs=1e-3)

    def test_scattering_must_be_positive(self):
        with pytest.raises(NonPositiveScattering):
            diffuse_reflectance(0.1, 0.0)

    @given(st.floats(1e-4, 50), st.floats(1e-4, 50), st.floats(0.1, 50))
    def test_monotonicity(self, a1, a2, musp):
        lo, hi = sorted((a1, a2))
        if hi - lo < 1e-6 * hi:
            return
        r_lo, r_hi = diffuse_reflectance(lo, musp), diffuse_reflectance(hi, musp)
        assert 0 < r_hi < r_lo <= 1
        assert diffuse_reflectance(lo, musp * 1.5) > r_lo

    def test_tends_to_one(self):
        r = diffuse_reflectance(np.array([1e-2, 1e-4, 1e-8]), 1.0)
        assert np.all(np.diff(r) > 0) and r[-1] > 0.999

    def test_two_flux_oracle_at_equal_coefficients(self):
        K, S = diffusion_to_two_flux(1.0, 1.0)
        thick = 40.0 / np.sqrt(K * (K + 2 * S))
        slab = two_flux_slab(K, S, thick, r_internal=0.0)
        assert slab == pytest.approx(kubelka_munk_infinite(K, S), rel=1e-6)
        assert diffuse_reflectance(1.0, 1.0) == pytest.approx(slab, rel=0.2)

    @pytest.mark.parametrize("ratio", [0.01, 0.1])
    def test_two_flux_oracle_agrees_in_tissue_range(self, ratio):
        K, S = diffusion_to_two_flux(ratio, 1.0)
        slab = two_flux_slab(K, S, 40.0 / np.sqrt(K * (K + 2 * S)), n=2000)
        assert diffuse_reflectance(ratio, 1.0) == pytest.approx(slab, rel=0.2)


class TestSkinSpectrum:
    def test_hemoglobin_dip_near_540(self):
        lam = table_grid()
        r = skin_spectrum(SkinOpticsParams(), lam)
        sel = (lam >= 500) & (lam <= 600)
        x, y = lam[sel], r[sel]
        minima = x[1:-1][(y[1:-1] < y[:-2]) & (y[1:-1] < y[2:])]
        assert np.any(np.abs(minima - 540) <= 10)

    def test_lesion_darker_and_converges(self):
        lam = table_grid()
        skin = skin_spectrum(SkinOpticsParams(), lam)
        lesion = skin_spectrum(SkinOpticsParams(melanin_fraction=0.2), lam)
        assert np.all(lesion[lam <= 700] < skin[lam <= 700])
        d = skin - lesion
        assert abs(d[lam == 950][0]) < abs(d[lam == 550][0])

    def test_zero_chromophores_is_white(self):
        assert np.all(skin_spectrum(ZERO, table_grid()) == 1.0)

    def test_homogeneous_variant(self):
        lam = table_grid()
        p = SkinOpticsParams()
        r = skin_spectrum(p, lam, epidermis_mm=None)
        expect = diffuse_reflectance(total_absorption(lam, p), reduced_scattering(lam, p))
        assert np.array_equal(r, expect)


def _random_points(n=20, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield SkinOpticsParams(rng.uniform(0.01, 0.4), rng.uniform(0.005, 0.08), rng.uniform(0.1, 0.95),
                               rng.uniform(0.2, 0.9), rng.uniform(1.0, 8.0), rng.uniform(0.6, 2.5))


def _assert_close(analytic, numeric, tol=1e-4):
    scale = np.maximum(np.abs(numeric), 1e-3 * np.max(np.abs(numeric)) + 1e-12)
    assert np.max(np.abs(analytic - numeric) / scale) < tol


def test_diffuse_reflectance_gradient():
    rng = np.random.default_rng(1)
    for _ in range(20):
        mua, musp = rng.uniform(0.01, 5.0), rng.uniform(0.5, 10.0)
        _, d_a, d_s = diffuse_reflectance_partials(mua, musp)
        num = central_difference(lambda v: diffuse_reflectance(v[0], v[1]), [mua, musp], [1e-6 * mua, 1e-6 * musp])
        _assert_close(np.array([d_a, d_s]), num)


@pytest.mark.parametrize("layered", [True, False])
def test_skin_spectrum_gradient(layered):
    lam = table_grid()
    kw = {} if layered else {"epidermis_mm": None}
    for p in _random_points():
        spec, jac = skin_spectrum_jacobian(p, lam, **kw)
        assert np.allclose(spec, skin_spectrum(p, lam, **kw), rtol=1e-13, atol=0)
        v = p.as_vector()
        num = central_difference(lambda x: skin_spectrum(SkinOpticsParams.from_vector(x), lam, **kw), v, 1e-6 * v)
        _assert_close(jac, num)
