"""Bit-exact binary field snapshots.

Layout (little-endian)::

    offset  size  content
    0       4     magic b"BNLS"
    4       2     format_version (u16)
    6       2     dim (u16)
    8       4     points_per_axis (u32)
    12      8     box_length (f64)
    20      32    p, mu, b, c (4 x f64)
    52      16*N^dim  interleaved (re, im) f64 pairs, row-major (C order)

Values are stored in physical space on the centred grid of ``bnlslab.grid``.
"""

from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagicError, SnapshotError, TruncatedPayloadError, VersionMismatchError
from .functionals import ModelParams
from .grid import Field, make_grid

MAGIC = b"BNLS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHId4d")
HEADER_SIZE = _HEADER.size


def write_snapshot(f: Field, params: ModelParams, path: str | os.PathLike) -> Path:
    g = f.grid
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, g.dim, g.points_per_axis, g.box_length,
        params.p, params.mu, params.b, params.c,
    )
    payload = np.ascontiguousarray(f.physical(), dtype="<c16").tobytes(order="C")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    return path


def read_snapshot(path: str | os.PathLike) -> tuple[Field, ModelParams]:
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        if data[:4] != MAGIC[: len(data[:4])]:
            raise BadMagicError(f"{path}: not a snapshot (magic {data[:4]!r})")
        raise TruncatedPayloadError(f"{path}: header truncated ({len(data)} bytes)")
    magic, version, dim, n, length, p, mu, b, c = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    grid = make_grid(dim, n, length)
    expected = 16 * grid.size
    payload = data[HEADER_SIZE:]
    if len(payload) < expected:
        raise TruncatedPayloadError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise SnapshotError(f"{path}: {len(payload) - expected} trailing bytes")
    values = np.frombuffer(payload, dtype="<c16").reshape(grid.shape).astype(np.complex128)
    return Field(grid, values), ModelParams(d=dim, p=p, mu=mu, b=b, c=c)


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
