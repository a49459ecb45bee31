import numpy as np
import pytest

from hyperderm.cube import BandMap
from hyperderm.skinsim.chromophores import table_grid
from hyperderm.skinsim.instrument import (
    IlluminationModel,
    LedComponent,
    SensorModel,
    SignalWeights,
    trapezoid_weights,
)
from hyperderm.errors import DataError


def test_trapezoid_weights_integrate_linear_exactly():
    g = np.array([0.0, 1.0, 3.0, 4.5])
    assert trapezoid_weights(g) @ (2 * g + 1) == pytest.approx(np.trapezoid(2 * g + 1, g))


class TestIllumination:
    def test_ir_peaks(self):
        g = table_grid()
        e = IlluminationModel().power(g)
        i = np.flatnonzero((e[1:-1] > e[:-2]) & (e[1:-1] > e[2:])) + 1
        peaks = g[i]
        assert np.any(np.abs(peaks - 910) <= 5)
        assert np.any(np.abs(peaks - 970) <= 5)

    def test_positive_in_band_range(self):
        lam = np.linspace(450, 950, 2001)
        assert np.all(IlluminationModel().power(lam) > 0)

    def test_normalized(self):
        assert IlluminationModel().power(table_grid()).max() == pytest.approx(1.0)

    def test_unknown_component_kind(self):
        with pytest.raises(DataError):
            IlluminationModel((LedComponent("square", 500, 10, 1),))


class TestSensor:
    def test_default_fwhm_grows(self):
        fwhm = np.asarray(SensorModel().band_map.fwhm)
        assert np.all(np.diff(fwhm) >= 0)

    def test_qe_positive_and_falling_in_nir(self):
        s = SensorModel()
        lam = np.linspace(450, 950, 501)
        qe = s.qe(lam)
        assert np.all(qe > 0) and np.all(qe <= 1)
        assert np.all(np.diff(s.qe(np.linspace(700, 1000, 50))) < 0)

    def test_responses_unit_area(self):
        g = table_grid()
        resp = SensorModel().responses(g)
        assert np.allclose(resp @ trapezoid_weights(g), 1.0)

    def test_only_12_bit(self):
        with pytest.raises(DataError):
            SensorModel(bit_depth=10)


def test_narrow_band_quadrature_converges_to_point_value():
    g = table_grid()
    centers = np.arange(452.0, 950.0, 20.0)
    sensor = SensorModel(band_map=BandMap(centers, np.full(centers.size, 2.0)))
    light = IlluminationModel()
    w = SignalWeights.build(sensor, light)
    r = 0.3 + 0.2 * np.sin(g / 40.0)
    got = w.signal(r)
    expect = light.power(centers) * sensor.qe(centers) * (0.3 + 0.2 * np.sin(centers / 40.0))
    assert np.allclose(got, expect, rtol=0.01)


def test_band_average_of_constant_is_constant():
    w = SignalWeights.build(SensorModel(), IlluminationModel())
    assert np.allclose(w.band_average(np.full(table_grid().size, 0.42)), 0.42)
