import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperderm.cube import (
    MONTAGE_PRESET_NM,
    BandMap,
    CaptureMeta,
    Domain,
    HyperCube,
    area_pixel_density,
    band_index_for_wavelength,
    band_montage,
    band_slice,
    channel_center_wavelength,
    normalize_to_8bit,
)
from hyperderm.errors import (
    DataError,
    EmptyWavelengthList,
    IndexOutOfRange,
    InvalidCube,
    NonPositiveInput,
)
from oracles import nearest_index_scan


def raw_cube(data):
    data = np.asarray(data)
    bm = BandMap(450.0 + 10.0 * np.arange(data.shape[2]), np.full(data.shape[2], 10.0))
    return HyperCube(Domain.RAW_COUNTS, data, bm)


class TestBandMap:
    def test_default_grid(self):
        bm = BandMap.default()
        assert bm.channel_count == 51
        assert np.all(np.diff(bm.centers) == 10.0)
        assert bm.centers[0] == 450.0 and bm.centers[-1] == 950.0

    def test_default_fwhm_non_decreasing(self):
        fwhm = np.asarray(BandMap.default().fwhm)
        assert np.all(np.diff(fwhm) >= 0)
        assert fwhm[0] == pytest.approx(8.0) and fwhm[-1] == pytest.approx(25.0)

    @pytest.mark.parametrize(
        "centers, fwhm",
        [
            ([500, 500], [10, 10]),
            ([600, 500], [10, 10]),
            ([390, 500], [10, 10]),
            ([500, 1001], [10, 10]),
            ([500, 510], [10, 0]),
            ([500], [10, 10]),
            ([], []),
        ],
    )
    def test_rejects_invalid(self, centers, fwhm):
        with pytest.raises(DataError):
            BandMap(centers, fwhm)


class TestChannelLookup:
    @pytest.mark.parametrize("k, nm", [(0, 450.0), (50, 950.0), (9, 540.0)])
    def test_center(self, k, nm):
        assert channel_center_wavelength(BandMap.default(), k) == nm

    @pytest.mark.parametrize("k", [-1, 51])
    def test_center_out_of_range(self, k):
        with pytest.raises(IndexOutOfRange):
            channel_center_wavelength(BandMap.default(), k)

    def test_examples(self):
        bm = BandMap.default()
        assert band_index_for_wavelength(bm, 540.0) == (9, False)
        assert band_index_for_wavelength(bm, 455.0) == (0, False)
        assert band_index_for_wavelength(bm, 449.0) == (0, False)

    def test_out_of_range_flag(self):
        bm = BandMap.default()
        assert band_index_for_wavelength(bm, 440.0) == (0, True)
        assert band_index_for_wavelength(bm, 955.0) == (50, False)
        assert band_index_for_wavelength(bm, 980.0) == (50, True)

    def test_non_finite(self):
        with pytest.raises(DataError):
            band_index_for_wavelength(BandMap.default(), math.nan)

    @given(st.floats(400, 1000, allow_nan=False))
    def test_matches_brute_force_scan(self, wl):
        bm = BandMap.default()
        assert band_index_for_wavelength(bm, wl).index == nearest_index_scan(bm.centers, wl)


class TestHyperCube:
    def test_raw_range(self):
        with pytest.raises(InvalidCube):
            raw_cube(np.full((1, 1, 2), 4096))
        with pytest.raises(InvalidCube):
            raw_cube(np.full((1, 1, 2), -1))
        with pytest.raises(InvalidCube):
            raw_cube(np.full((1, 1, 2), 1.5))

    def test_band_count_must_match(self):
        with pytest.raises(InvalidCube):
            HyperCube(Domain.RAW_COUNTS, np.zeros((2, 2, 3)), BandMap.default())

    def test_reflectance_must_be_finite(self):
        bm = BandMap([500.0, 600.0], [10.0, 10.0])
        with pytest.raises(InvalidCube):
            HyperCube(Domain.REFLECTANCE, np.array([[[0.1, np.nan]]]), bm)

    def test_meta_defaults(self):
        m = CaptureMeta()
        assert m.fov_mm == (20.0, 20.0)
        assert m.working_distance_mm == 56.0
        with pytest.raises(DataError):
            CaptureMeta(fov_mm=(0, 20))

    def test_meta_round_trip_keeps_extra(self):
        m = CaptureMeta(patient_id="P1", body_part="Face", extra={"reference_role": "dark"})
        assert CaptureMeta.from_dict(m.to_dict()) == m


class TestBandSlice:
    def test_constant_cube(self):
        cube = raw_cube(np.full((3, 4, 5), 123))
        assert np.all(band_slice(cube, 2) == 123)

    def test_index_cube(self):
        data = np.broadcast_to(np.arange(6), (3, 4, 6)).copy()
        cube = raw_cube(data)
        for k in range(6):
            assert np.all(band_slice(cube, k) == k)

    def test_returns_copy(self):
        cube = raw_cube(np.zeros((2, 2, 2)))
        plane = band_slice(cube, 0)
        plane[:] = 7
        assert np.all(cube.data == 0)

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            band_slice(raw_cube(np.zeros((2, 2, 2))), 2)

    @settings(max_examples=30)
    @given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_exhaustive_indexing(self, r, c, b, seed):
        data = np.random.default_rng(seed).integers(0, 4096, (r, c, b))
        cube = raw_cube(data)
        for k in range(b):
            assert np.array_equal(band_slice(cube, k), data[:, :, k])


class TestMontage:
    def test_preset_has_hemoglobin_tiles(self):
        cube = HyperCube(Domain.RAW_COUNTS, np.random.default_rng(0).integers(0, 4096, (5, 6, 51)),
                         BandMap.default())
        m = band_montage(cube, MONTAGE_PRESET_NM)
        assert len(m.labels_nm) == len(MONTAGE_PRESET_NM)
        assert 540.0 in m.labels_nm and 570.0 in m.labels_nm
        assert m.labels_nm == [float(w) for w in MONTAGE_PRESET_NM]

    def test_single_tile_is_normalized_slice(self):
        data = np.random.default_rng(1).integers(0, 4096, (4, 5, 51))
        cube = HyperCube(Domain.RAW_COUNTS, data, BandMap.default())
        m = band_montage(cube, [700])
        assert np.array_equal(m.image, normalize_to_8bit(band_slice(cube, 25)))

    def test_constant_plane_maps_to_zero(self):
        cube = raw_cube(np.full((3, 3, 2), 900))
        assert np.all(band_montage(cube, [450]).image == 0)

    def test_duplicates_and_order(self):
        data = np.random.default_rng(2).integers(0, 4096, (3, 3, 51))
        cube = HyperCube(Domain.RAW_COUNTS, data, BandMap.default())
        wl = [900, 450, 900, 600, 451]
        m = band_montage(cube, wl)
        assert m.band_indices == [45, 0, 45, 15, 0]
        assert np.array_equal(m.tile(0), m.tile(2))
        assert len(m.labels_document()["tiles"]) == 5

    def test_empty_list(self):
        with pytest.raises(EmptyWavelengthList):
            band_montage(raw_cube(np.zeros((2, 2, 2))), [])

    def test_normalize_stretches_full_range(self):
        out = normalize_to_8bit(np.array([[10.0, 20.0], [15.0, 10.0]]))
        assert out.min() == 0 and out.max() == 255


class TestPixelDensity:
    def test_camera_value(self):
        assert area_pixel_density((290, 275), (20, 20)) == 199.375

    def test_unit(self):
        assert area_pixel_density((100, 100), (10, 10)) == 100.0

    def test_large_sensor_back_computed_fov(self):
        assert area_pixel_density((1010, 1010), (80, 80)) == pytest.approx(159.39, abs=0.01)

    @pytest.mark.parametrize("res, fov", [((0, 1), (1, 1)), ((1, 1), (1, -2))])
    def test_non_positive(self, res, fov):
        with pytest.raises(NonPositiveInput):
            area_pixel_density(res, fov)

    @given(st.integers(1, 5000), st.integers(1, 5000), st.floats(0.1, 500), st.floats(0.1, 500))
    def test_transpose_invariance(self, r, c, w, h):
        assert area_pixel_density((r, c), (w, h)) == pytest.approx(area_pixel_density((c, r), (h, w)))
