import json
import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from hyperderm.cube import BandMap, BodyPart, CaptureMeta, Domain, HyperCube
from hyperderm.errors import DimensionMismatch, InvalidCube, MalformedHeader, MissingInput, UnsupportedVersion
from hyperderm.hsc import decode_cube, encode_cube, header_size, load_cube, payload_width, save_cube
from oracles import parse_hsc


@st.composite
def cubes(draw):
    r, c, b = draw(st.integers(1, 8)), draw(st.integers(1, 8)), draw(st.integers(1, 8))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    start = draw(st.floats(400, 500))
    centers = start + np.cumsum(rng.uniform(1, 60, b))
    centers = centers[centers <= 1000] if centers[-1] > 1000 else centers
    if centers.size < b:
        centers = np.linspace(400, 1000, b)
    bm = BandMap(centers, rng.uniform(1, 40, b))
    meta = CaptureMeta(
        fov_mm=(draw(st.floats(1, 100)), draw(st.floats(1, 100))),
        patient_id=draw(st.text(max_size=8)),
        body_part=draw(st.sampled_from(list(BodyPart))),
        timestamp="2024-05-01T10:00:00",
    )
    if draw(st.booleans()):
        data = rng.integers(0, 4096, (r, c, b))
        return HyperCube(Domain.RAW_COUNTS, data, bm, meta)
    data = rng.normal(0.5, 0.5, (r, c, b))
    return HyperCube(Domain.REFLECTANCE, data, bm, meta)


@settings(max_examples=60, suppress_health_check=[HealthCheck.too_slow])
@given(cubes())
def test_round_trip_identity(cube):
    back = decode_cube(encode_cube(cube))
    assert back == cube
    assert back.data.tobytes() == cube.data.tobytes()


@settings(max_examples=30)
@given(cubes())
def test_layout_matches_standalone_reader(cube):
    raw = encode_cube(cube)
    parsed = parse_hsc(raw)
    assert parsed["magic"] == b"HSC1" and parsed["version"] == 1
    assert parsed["domain"] == int(cube.domain)
    assert (parsed["rows"], parsed["cols"], parsed["bands"]) == cube.shape
    assert np.array_equal(parsed["centers"], np.asarray(cube.band_map.centers, dtype=np.float32))
    assert np.array_equal(parsed["payload"], cube.data)
    assert parsed["end"] == len(raw)
    meta = json.loads(parsed["meta"])
    assert {"fov_mm", "working_distance_mm", "patient_id", "body_part", "timestamp"} <= set(meta)


def test_save_twice_byte_identical(tmp_path):
    cube = HyperCube(Domain.RAW_COUNTS, np.arange(24).reshape(2, 3, 4), BandMap([450, 500, 550, 600], [8] * 4))
    save_cube(cube, tmp_path / "a.hsc")
    save_cube(cube, tmp_path / "b.hsc")
    assert (tmp_path / "a.hsc").read_bytes() == (tmp_path / "b.hsc").read_bytes()
    assert load_cube(tmp_path / "a.hsc") == cube


@pytest.mark.parametrize("domain", list(Domain))
def test_file_size_formula(tmp_path, domain):
    cube = HyperCube(domain, np.ones((2, 2, 3)), BandMap([500, 600, 700], [10, 10, 10]))
    path = tmp_path / "c.hsc"
    save_cube(cube, path)
    meta_len = struct.unpack_from("<I", path.read_bytes(), 19 + 8 * 3)[0]
    size = path.stat().st_size
    assert size == header_size(3, meta_len) + 2 * 2 * 3 * payload_width(domain)
    assert payload_width(domain) == (2 if domain is Domain.RAW_COUNTS else 4)


def test_constant_full_size_cube(tmp_path):
    cube = HyperCube(Domain.RAW_COUNTS, np.full((290, 275, 51), 1000, dtype=np.uint16), BandMap.default())
    save_cube(cube, tmp_path / "big.hsc")
    back = load_cube(tmp_path / "big.hsc")
    assert back.shape == (290, 275, 51)
    assert back.data.min() == 1000 and back.data.max() == 1000


def test_nan_rejected_before_write(tmp_path):
    cube = HyperCube(Domain.REFLECTANCE, np.zeros((1, 1, 2)), BandMap([500, 600], [10, 10]))
    cube.data[0, 0, 1] = np.nan  # bypass constructor validation
    with pytest.raises(InvalidCube):
        save_cube(cube, tmp_path / "nan.hsc")
    assert not (tmp_path / "nan.hsc").exists()


def _sample_bytes():
    cube = HyperCube(Domain.RAW_COUNTS, np.ones((2, 2, 2)), BandMap([500, 600], [10, 10]))
    return encode_cube(cube)


def test_payload_size_mismatch():
    raw = _sample_bytes()
    with pytest.raises(DimensionMismatch):
        decode_cube(raw[:-2])
    with pytest.raises(DimensionMismatch):
        decode_cube(raw + b"\0\0")


def test_bad_magic():
    with pytest.raises(MalformedHeader):
        decode_cube(b"XXXX" + _sample_bytes()[4:])
    with pytest.raises(MalformedHeader):
        decode_cube(b"HSC")


def test_unsupported_version():
    raw = bytearray(_sample_bytes())
    raw[4:6] = struct.pack("<H", 2)
    with pytest.raises(UnsupportedVersion):
        decode_cube(bytes(raw))


def test_missing_file(tmp_path):
    with pytest.raises(MissingInput):
        load_cube(tmp_path / "absent.hsc")
