"""HSC cube files.

Layout, all integers little-endian::

    "HSC1" | version u16 | domain u8 | rows u32 | cols u32 | bands u32
    | centers f32[bands] | fwhm f32[bands] | meta_len u32 | meta (UTF-8 JSON)
    | payload (row-major, band innermost; u16 for raw counts, f32 for reflectance)
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .cube import BandMap, CaptureMeta, Domain, HyperCube
from .errors import DataError, DimensionMismatch, InvalidCube, MalformedHeader, UnsupportedVersion
from .fileio import atomic_write_bytes, read_bytes

MAGIC = b"HSC1"
VERSION = 1
_FIXED = struct.Struct("<4sHBIII")
_PAYLOAD_DTYPE = {Domain.RAW_COUNTS: np.dtype("<u2"), Domain.REFLECTANCE: np.dtype("<f4")}


def header_size(bands: int, meta_bytes: int) -> int:
    return _FIXED.size + 8 * bands + 4 + meta_bytes


def payload_width(domain: Domain) -> int:
    return _PAYLOAD_DTYPE[Domain(domain)].itemsize


def _meta_bytes(meta: CaptureMeta) -> bytes:
    return json.dumps(meta.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode_cube(cube: HyperCube) -> bytes:
    data = cube.data
    if cube.domain is Domain.REFLECTANCE and not np.all(np.isfinite(data)):
        raise InvalidCube("refusing to write reflectance payload containing NaN or Inf")
    if cube.domain is Domain.RAW_COUNTS and data.size and data.max() > 4095:
        raise InvalidCube("raw counts exceed the 12-bit range")
    centers, fwhm = cube.band_map.as_arrays()
    meta = _meta_bytes(cube.meta)
    parts = [
        _FIXED.pack(MAGIC, VERSION, int(cube.domain), cube.rows, cube.cols, cube.bands),
        centers.astype("<f4").tobytes(),
        fwhm.astype("<f4").tobytes(),
        struct.pack("<I", len(meta)),
        meta,
        np.ascontiguousarray(data, dtype=_PAYLOAD_DTYPE[cube.domain]).tobytes(),
    ]
    return b"".join(parts)


def decode_cube(raw: bytes, source: str = "<bytes>") -> HyperCube:
    if len(raw) < _FIXED.size:
        raise MalformedHeader(f"{source}: file too short for an HSC header")
    magic, version, domain, rows, cols, bands = _FIXED.unpack_from(raw, 0)
    if magic != MAGIC:
        raise MalformedHeader(f"{source}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"{source}: HSC version {version} (supported: {VERSION})")
    try:
        domain = Domain(domain)
    except ValueError as exc:
        raise MalformedHeader(f"{source}: unknown domain code {domain}") from exc
    pos = _FIXED.size
    if len(raw) < pos + 8 * bands + 4:
        raise MalformedHeader(f"{source}: truncated band table")
    centers = np.frombuffer(raw, "<f4", bands, pos)
    fwhm = np.frombuffer(raw, "<f4", bands, pos + 4 * bands)
    pos += 8 * bands
    (meta_len,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    if len(raw) < pos + meta_len:
        raise MalformedHeader(f"{source}: truncated metadata block")
    try:
        meta = CaptureMeta.from_dict(json.loads(raw[pos:pos + meta_len].decode("utf-8")))
        band_map = BandMap(centers, fwhm)
    except (UnicodeDecodeError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise MalformedHeader(f"{source}: invalid header content: {exc}") from exc
    pos += meta_len
    dtype = _PAYLOAD_DTYPE[domain]
    expected = rows * cols * bands * dtype.itemsize
    if len(raw) - pos != expected:
        raise DimensionMismatch(
            f"{source}: {rows}x{cols}x{bands} needs {expected} payload bytes, found {len(raw) - pos}"
        )
    data = np.frombuffer(raw, dtype, rows * cols * bands, pos).reshape(rows, cols, bands)
    try:
        return HyperCube(domain, data.astype(dtype.newbyteorder("=")), band_map, meta)
    except DataError as exc:
        raise InvalidCube(f"{source}: {exc}") from exc


def save_cube(cube: HyperCube, path) -> None:
    atomic_write_bytes(path, encode_cube(cube))


def load_cube(path) -> HyperCube:
    return decode_cube(read_bytes(path), str(path))
