"""Reader/writer for the FLD1 field container.

Layout: 8-byte magic ``FLD1\\0\\0\\0\\0``, a 32-bit little-endian length,
that many bytes of UTF-8 JSON with keys ``{nx, ny, tag, extent}``, then the
row-major little-endian float64 payload — ``nx*ny`` doubles for a real
field, ``2*nx*ny`` (interleaved re/im) for a complex one.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core.field import Field, VALID_TAGS
from .errors import DataFormatError

MAGIC = b"FLD1\x00\x00\x00\x00"


def write_fld(path, f: Field) -> None:
    header = {
        "nx": f.nx,
        "ny": f.ny,
        "tag": f.tag,
        "extent": [f.extent[0], f.extent[1]],
    }
    hbytes = json.dumps(header).encode("utf-8")
    if f.tag == "real":
        payload = np.ascontiguousarray(f.data.real, dtype="<f8").tobytes()
    else:
        inter = np.empty((f.ny, f.nx, 2), dtype="<f8")
        inter[..., 0] = f.data.real
        inter[..., 1] = f.data.imag
        payload = inter.tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hbytes)))
        fh.write(hbytes)
        fh.write(payload)


def read_fld(path) -> Field:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise DataFormatError(f"{path}: not an FLD1 field file")
    (hlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    hstart = len(MAGIC) + 4
    if hstart + hlen > len(raw):
        raise DataFormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[hstart : hstart + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: bad JSON header ({exc})") from exc
    for key in ("nx", "ny", "tag", "extent"):
        if key not in header:
            raise DataFormatError(f"{path}: header missing key {key!r}")
    nx, ny, tag = int(header["nx"]), int(header["ny"]), header["tag"]
    if tag not in VALID_TAGS:
        raise DataFormatError(f"{path}: unknown tag {tag!r}")
    if nx <= 0 or ny <= 0:
        raise DataFormatError(f"{path}: bad dimensions {nx}x{ny}")
    per_sample = 2 if tag == "complex" else 1
    expected = nx * ny * per_sample * 8
    payload = raw[hstart + hlen :]
    if len(payload) != expected:
        raise DataFormatError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    bad = np.flatnonzero(np.isnan(flat))
    if bad.size:
        raise DataFormatError(f"{path}: NaN in payload at scalar index {bad[0]}")
    if tag == "complex":
        pairs = flat.reshape(ny, nx, 2)
        data = pairs[..., 0] + 1j * pairs[..., 1]
    else:
        data = flat.reshape(ny, nx).astype(np.complex128)
    extent = (float(header["extent"][0]), float(header["extent"][1]))
    return Field(data, extent=extent, tag=tag)
