"""Minimal GeoTIFF reader/writer (classic TIFF, strip-organized).

Supports what the pipeline needs and nothing more:

* read: both byte orders, chunky or planar strips, no compression or
  deflate, integer and float sample types;
* write: little-endian, chunky, single strip, optional deflate;
* georeferencing via ModelPixelScale+ModelTiepoint (axis-aligned) or
  ModelTransformation (sheared), CRS via the GeoKey directory, nodata
  via the GDAL_NODATA ASCII tag.

Tiled layouts, palettes, predictors and sub-byte samples are rejected
with UnsupportedEncoding rather than half-read.
"""

from __future__ import annotations

import math
import struct
import zlib
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import IoFailure, MissingGeoreference, UnsupportedEncoding
from .raster import CrsId, GeoRaster, GeoTransform

TAG_IMAGE_WIDTH = 256
TAG_IMAGE_LENGTH = 257
TAG_BITS_PER_SAMPLE = 258
TAG_COMPRESSION = 259
TAG_PHOTOMETRIC = 262
TAG_STRIP_OFFSETS = 273
TAG_SAMPLES_PER_PIXEL = 277
TAG_ROWS_PER_STRIP = 278
TAG_STRIP_BYTE_COUNTS = 279
TAG_PLANAR_CONFIG = 284
TAG_PREDICTOR = 317
TAG_TILE_WIDTH = 322
TAG_TILE_LENGTH = 323
TAG_EXTRA_SAMPLES = 338
TAG_SAMPLE_FORMAT = 339
TAG_MODEL_PIXEL_SCALE = 33550
TAG_MODEL_TIEPOINT = 33922
TAG_MODEL_TRANSFORMATION = 34264
TAG_GEO_KEY_DIRECTORY = 34735
TAG_GDAL_NODATA = 42113

GEOKEY_MODEL_TYPE = 1024
GEOKEY_RASTER_TYPE = 1025
GEOKEY_GEOGRAPHIC_TYPE = 2048
GEOKEY_PROJECTED_TYPE = 3072

COMPRESSION_NONE = 1
COMPRESSION_DEFLATE = 8
COMPRESSION_DEFLATE_OLD = 32946

# TIFF field type -> (struct letter, byte size)
_FIELD_TYPES = {
    1: ("B", 1),   # BYTE
    2: ("s", 1),   # ASCII
    3: ("H", 2),   # SHORT
    4: ("I", 4),   # LONG
    5: ("II", 8),  # RATIONAL
    6: ("b", 1),   # SBYTE
    7: ("B", 1),   # UNDEFINED
    8: ("h", 2),   # SSHORT
    9: ("i", 4),   # SLONG
    10: ("ii", 8), # SRATIONAL
    11: ("f", 4),  # FLOAT
    12: ("d", 8),  # DOUBLE
}

# (sample_format, bits) -> numpy dtype char
_DTYPES = {
    (1, 8): "u1", (1, 16): "u2", (1, 32): "u4", (1, 64): "u8",
    (2, 8): "i1", (2, 16): "i2", (2, 32): "i4", (2, 64): "i8",
    (3, 32): "f4", (3, 64): "f8",
}
_SAMPLE_FORMAT = {"u": 1, "i": 2, "f": 3}


class _Entry:
    __slots__ = ("tag", "ftype", "count", "raw")

    def __init__(self, tag, ftype, count, raw):
        self.tag, self.ftype, self.count, self.raw = tag, ftype, count, raw


def _parse_entries(buf: bytes, order: str) -> dict[int, _Entry]:
    if len(buf) < 8:
        raise UnsupportedEncoding("file too small to be a TIFF")
    ifd_offset, = struct.unpack(order + "I", buf[4:8])
    if ifd_offset + 2 > len(buf):
        raise UnsupportedEncoding("truncated TIFF: IFD offset past EOF")
    n, = struct.unpack(order + "H", buf[ifd_offset:ifd_offset + 2])
    entries = {}
    pos = ifd_offset + 2
    if pos + 12 * n > len(buf):
        raise UnsupportedEncoding("truncated TIFF: IFD past EOF")
    for _ in range(n):
        tag, ftype, count = struct.unpack(order + "HHI", buf[pos:pos + 8])
        if ftype not in _FIELD_TYPES:
            pos += 12
            continue
        size = _FIELD_TYPES[ftype][1] * count
        if size <= 4:
            raw = buf[pos + 8:pos + 8 + size]
        else:
            off, = struct.unpack(order + "I", buf[pos + 8:pos + 12])
            if off + size > len(buf):
                raise UnsupportedEncoding("truncated TIFF: tag value past EOF")
            raw = buf[off:off + size]
        entries[tag] = _Entry(tag, ftype, count, raw)
        pos += 12
    return entries


def _values(entry: _Entry, order: str):
    letter, size = _FIELD_TYPES[entry.ftype]
    if entry.ftype == 2:  # ASCII
        return entry.raw.split(b"\x00")[0].decode("ascii", errors="replace")
    if entry.ftype in (5, 10):  # rationals -> floats
        nums = struct.unpack(order + ("I" if entry.ftype == 5 else "i") * 2 * entry.count,
                             entry.raw)
        return [nums[2 * i] / nums[2 * i + 1] for i in range(entry.count)]
    vals = struct.unpack(order + letter * entry.count, entry.raw)
    return list(vals)


def _scalar(entries, tag, order, default=None):
    if tag not in entries:
        return default
    return _values(entries[tag], order)[0]


def _uniform(entries, tag, order, default):
    """Per-band tag that must hold one value for every band."""
    if tag not in entries:
        return default
    vals = _values(entries[tag], order)
    if len(set(vals)) != 1:
        raise UnsupportedEncoding(f"per-band tag {tag} values differ: {vals}")
    return vals[0]


def _geotransform(entries, order) -> GeoTransform:
    if TAG_MODEL_TRANSFORMATION in entries:
        m = _values(entries[TAG_MODEL_TRANSFORMATION], order)
        if len(m) != 16:
            raise UnsupportedEncoding("ModelTransformation must hold 16 doubles")
        return GeoTransform(origin_x=m[3], pixel_w=m[0], shear_x=m[1],
                            origin_y=m[7], shear_y=m[4], pixel_h=m[5])
    if TAG_MODEL_PIXEL_SCALE in entries and TAG_MODEL_TIEPOINT in entries:
        sx, sy = _values(entries[TAG_MODEL_PIXEL_SCALE], order)[:2]
        tp = _values(entries[TAG_MODEL_TIEPOINT], order)
        if len(tp) < 6:
            raise UnsupportedEncoding("ModelTiepoint must hold at least 6 doubles")
        i, j, _, x, y, _ = tp[:6]
        return GeoTransform(origin_x=x - i * sx, pixel_w=sx, shear_x=0.0,
                            origin_y=y + j * sy, shear_y=0.0, pixel_h=-sy)
    raise MissingGeoreference("no ModelTransformation or PixelScale+Tiepoint tags")


def _crs(entries, order) -> CrsId:
    if TAG_GEO_KEY_DIRECTORY not in entries:
        raise MissingGeoreference("no GeoKey directory")
    shorts = _values(entries[TAG_GEO_KEY_DIRECTORY], order)
    if len(shorts) < 4:
        raise MissingGeoreference("GeoKey directory too short")
    nkeys = shorts[3]
    keys = {}
    for k in range(nkeys):
        base = 4 + 4 * k
        if base + 4 > len(shorts):
            break
        key_id, location, count, value = shorts[base:base + 4]
        if location == 0 and count == 1:
            keys[key_id] = value
    code = keys.get(GEOKEY_PROJECTED_TYPE) or keys.get(GEOKEY_GEOGRAPHIC_TYPE)
    if not code or code == 32767:
        raise MissingGeoreference("GeoKey directory carries no EPSG code")
    return CrsId(int(code))


def read_raster(path) -> GeoRaster:
    """Read a GeoTIFF into a GeoRaster.

    Geometry comes back exactly as tagged; integer band values are
    preserved bit-exactly.
    """
    buf = Path(path).read_bytes()
    if buf[:4] == b"II*\x00":
        order = "<"
    elif buf[:4] == b"MM\x00*":
        order = ">"
    else:
        raise UnsupportedEncoding("not a classic TIFF (bad magic)")
    entries = _parse_entries(buf, order)

    if TAG_TILE_WIDTH in entries or TAG_TILE_LENGTH in entries:
        raise UnsupportedEncoding("tiled TIFF layout not supported")
    predictor = _scalar(entries, TAG_PREDICTOR, order, 1)
    if predictor != 1:
        raise UnsupportedEncoding(f"predictor {predictor} not supported")

    width = _scalar(entries, TAG_IMAGE_WIDTH, order)
    height = _scalar(entries, TAG_IMAGE_LENGTH, order)
    if not width or not height:
        raise UnsupportedEncoding("missing image dimensions")
    bands = int(_scalar(entries, TAG_SAMPLES_PER_PIXEL, order, 1))
    bits = int(_uniform(entries, TAG_BITS_PER_SAMPLE, order, 8))
    fmt = int(_uniform(entries, TAG_SAMPLE_FORMAT, order, 1))
    if (fmt, bits) not in _DTYPES:
        raise UnsupportedEncoding(f"sample format {fmt} with {bits} bits not supported")
    dtype = np.dtype(order + _DTYPES[(fmt, bits)])
    compression = int(_scalar(entries, TAG_COMPRESSION, order, COMPRESSION_NONE))
    if compression not in (COMPRESSION_NONE, COMPRESSION_DEFLATE, COMPRESSION_DEFLATE_OLD):
        raise UnsupportedEncoding(f"compression {compression} not supported")
    planar = int(_scalar(entries, TAG_PLANAR_CONFIG, order, 1))
    if planar not in (1, 2):
        raise UnsupportedEncoding(f"planar configuration {planar} not supported")

    if TAG_STRIP_OFFSETS not in entries or TAG_STRIP_BYTE_COUNTS not in entries:
        raise UnsupportedEncoding("missing strip layout tags")
    offsets = [int(v) for v in _values(entries[TAG_STRIP_OFFSETS], order)]
    counts = [int(v) for v in _values(entries[TAG_STRIP_BYTE_COUNTS], order)]
    if len(offsets) != len(counts):
        raise UnsupportedEncoding("strip offset/count mismatch")

    chunks = []
    for off, cnt in zip(offsets, counts):
        if off + cnt > len(buf):
            raise UnsupportedEncoding("truncated TIFF: strip past EOF")
        raw = buf[off:off + cnt]
        if compression != COMPRESSION_NONE:
            try:
                raw = zlib.decompress(raw)
            except zlib.error as e:
                raise UnsupportedEncoding(f"bad deflate strip: {e}") from e
        chunks.append(raw)
    payload = b"".join(chunks)

    expected = width * height * bands * dtype.itemsize
    if len(payload) < expected:
        raise UnsupportedEncoding(
            f"pixel payload has {len(payload)} bytes, expected {expected}")
    flat = np.frombuffer(payload[:expected], dtype=dtype)
    if planar == 1:
        data = flat.reshape(height, width, bands)
        data = np.moveaxis(data, 2, 0)
    else:
        data = flat.reshape(bands, height, width)
    data = np.ascontiguousarray(data).astype(dtype.newbyteorder("="), copy=False)

    gt = _geotransform(entries, order)
    crs = _crs(entries, order)

    nodata = None
    if TAG_GDAL_NODATA in entries:
        text = _values(entries[TAG_GDAL_NODATA], order).strip()
        if text:
            value = float(text)
            if np.issubdtype(data.dtype, np.integer) and value.is_integer():
                nodata = int(value)
            else:
                nodata = value

    return GeoRaster(data, gt, crs, nodata=nodata)


def _pack_entry(order, tag, ftype, values, external: list) -> bytes:
    """Encode one IFD entry, stashing oversize payloads in `external`."""
    letter, size = _FIELD_TYPES[ftype]
    if ftype == 2:
        payload = values  # already bytes with trailing NUL
        count = len(payload)
    else:
        payload = struct.pack(order + letter * len(values), *values)
        count = len(values)
    if len(payload) <= 4:
        head = struct.pack(order + "HHI", tag, ftype, count)
        return head + payload.ljust(4, b"\x00")
    external.append((tag, payload))
    # offset patched later; keep a placeholder the caller rewrites
    return struct.pack(order + "HHII", tag, ftype, count, 0)


def _geo_key_directory(code: int) -> list[int]:
    geographic = 4000 <= code <= 4999
    model = 2 if geographic else 1
    code_key = GEOKEY_GEOGRAPHIC_TYPE if geographic else GEOKEY_PROJECTED_TYPE
    keys = [
        (GEOKEY_MODEL_TYPE, 0, 1, model),
        (GEOKEY_RASTER_TYPE, 0, 1, 1),  # PixelIsArea
        (code_key, 0, 1, code),
    ]
    out = [1, 1, 0, len(keys)]
    for k in keys:
        out.extend(k)
    return out


def _format_nodata(value) -> bytes:
    if isinstance(value, (int, np.integer)):
        text = str(int(value))
    else:
        text = repr(float(value))
    return text.encode("ascii") + b"\x00"


def write_raster(path, raster: GeoRaster, compress: bool = False) -> None:
    """Write a GeoRaster as a little-endian, chunky, single-strip GeoTIFF.

    Deterministic: identical rasters produce identical bytes. Round trips
    through read_raster preserve geometry exactly and integer values
    bit-exactly.
    """
    order = "<"
    data = raster.data
    kind = data.dtype.kind
    if kind not in _SAMPLE_FORMAT:
        raise UnsupportedEncoding(f"cannot write dtype {data.dtype}")
    bits = data.dtype.itemsize * 8
    fmt = _SAMPLE_FORMAT[kind]
    if (fmt, bits) not in _DTYPES:
        raise UnsupportedEncoding(f"cannot write dtype {data.dtype}")
    bands, height, width = data.shape
    if raster.crs.code > 65534:
        raise UnsupportedEncoding(
            f"EPSG code {raster.crs.code} does not fit a GeoKey SHORT")

    interleaved = np.moveaxis(data, 0, 2)
    payload = np.ascontiguousarray(interleaved, dtype=data.dtype.newbyteorder("<")).tobytes()
    if compress:
        payload = zlib.compress(payload, 6)

    gt = raster.geotransform
    axis_aligned = gt.shear_x == 0.0 and gt.shear_y == 0.0 and gt.pixel_w > 0 and gt.pixel_h < 0

    photometric = 2 if bands >= 3 else 1
    tags = [
        (TAG_IMAGE_WIDTH, 4, [width]),
        (TAG_IMAGE_LENGTH, 4, [height]),
        (TAG_BITS_PER_SAMPLE, 3, [bits] * bands),
        (TAG_COMPRESSION, 3, [COMPRESSION_DEFLATE if compress else COMPRESSION_NONE]),
        (TAG_PHOTOMETRIC, 3, [photometric]),
        (TAG_STRIP_OFFSETS, 4, [0]),  # patched below
        (TAG_SAMPLES_PER_PIXEL, 3, [bands]),
        (TAG_ROWS_PER_STRIP, 4, [height]),
        (TAG_STRIP_BYTE_COUNTS, 4, [len(payload)]),
        (TAG_PLANAR_CONFIG, 3, [1]),
        (TAG_SAMPLE_FORMAT, 3, [fmt] * bands),
    ]
    n_color = 3 if photometric == 2 else 1
    if bands > n_color:
        tags.append((TAG_EXTRA_SAMPLES, 3, [0] * (bands - n_color)))
    if axis_aligned:
        tags.append((TAG_MODEL_PIXEL_SCALE, 12, [gt.pixel_w, -gt.pixel_h, 0.0]))
        tags.append((TAG_MODEL_TIEPOINT, 12,
                     [0.0, 0.0, 0.0, gt.origin_x, gt.origin_y, 0.0]))
    else:
        matrix = [gt.pixel_w, gt.shear_x, 0.0, gt.origin_x,
                  gt.shear_y, gt.pixel_h, 0.0, gt.origin_y,
                  0.0, 0.0, 0.0, 0.0,
                  0.0, 0.0, 0.0, 1.0]
        tags.append((TAG_MODEL_TRANSFORMATION, 12, matrix))
    tags.append((TAG_GEO_KEY_DIRECTORY, 3, _geo_key_directory(raster.crs.code)))
    if raster.nodata is not None:
        tags.append((TAG_GDAL_NODATA, 2, _format_nodata(raster.nodata)))
    tags.sort(key=lambda t: t[0])

    external: list[tuple[int, bytes]] = []
    entry_bytes = [_pack_entry(order, tag, ftype, vals, external)
                   for tag, ftype, vals in tags]

    ifd_offset = 8
    ifd_size = 2 + 12 * len(tags) + 4
    ext_offset = ifd_offset + ifd_size
    ext_offsets = {}
    blob = b""
    for tag, data_bytes in external:
        ext_offsets[tag] = ext_offset + len(blob)
        blob += data_bytes
        if len(blob) % 2:
            blob += b"\x00"
    strip_offset = ext_offset + len(blob)
    if strip_offset % 2:
        blob += b"\x00"
        strip_offset += 1

    fixed = []
    for raw, (tag, ftype, _vals) in zip(entry_bytes, tags):
        if tag in ext_offsets:
            raw = raw[:8] + struct.pack(order + "I", ext_offsets[tag])
        if tag == TAG_STRIP_OFFSETS:
            raw = raw[:8] + struct.pack(order + "I", strip_offset)
        fixed.append(raw)

    out = bytearray()
    out += struct.pack(order + "2sHI", b"II", 42, ifd_offset)
    out += struct.pack(order + "H", len(tags))
    out += b"".join(fixed)
    out += struct.pack(order + "I", 0)  # no next IFD
    out += blob
    out += payload

    try:
        Path(path).write_bytes(bytes(out))
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
