"""Binary snapshot files.

Layout (little-endian)::

    offset  type        content
    0       4 bytes     magic b"CHSN"
    4       uint32      format version (1)
    8       uint32      dim (1 or 2)
    12      uint32[dim] cell counts per axis
    ..      float64     time
    ..      float64[n]  u, row-major
    ..      float64[n]  v, row-major
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import Grid
from .model import State

MAGIC = b"CHSN"
VERSION = 1


class SnapshotError(ValueError):
    """Corrupt or mismatched snapshot file; ``offset`` is the first bad byte."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"offset {offset}: {message}")


def encode_snapshot(state: State) -> bytes:
    u = np.ascontiguousarray(state.u, dtype="<f8")
    v = np.ascontiguousarray(state.v, dtype="<f8")
    if u.shape != v.shape or u.ndim not in (1, 2):
        raise ValueError("u and v must share a 1D or 2D shape")
    head = MAGIC + struct.pack(f"<II{u.ndim}Id", VERSION, u.ndim, *u.shape, float(state.t))
    return head + u.tobytes() + v.tobytes()


def decode_snapshot(buf: bytes, grid: Grid | None = None) -> State:
    n = len(buf)

    def need(off, size, what):
        if off + size > n:
            raise SnapshotError(f"file truncated: need {size} bytes for {what}, have {max(0, n - off)}", off)

    need(0, 4, "magic")
    if buf[:4] != MAGIC:
        raise SnapshotError(f"bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}", 0)
    need(4, 8, "version and dim")
    version, dim = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise SnapshotError(f"unsupported version {version}, expected {VERSION}", 4)
    if dim not in (1, 2):
        raise SnapshotError(f"dim must be 1 or 2, got {dim}", 8)
    need(12, 4 * dim, "cell counts")
    counts = struct.unpack_from(f"<{dim}I", buf, 12)
    for i, c in enumerate(counts):
        if c == 0:
            raise SnapshotError(f"cell count on axis {i} is zero", 12 + 4 * i)
    if grid is not None and tuple(counts) != grid.shape:
        if dim != grid.dim:
            off = 8
        else:
            off = 12 + 4 * next(i for i in range(dim) if counts[i] != grid.shape[i])
        raise SnapshotError(f"shape {tuple(counts)} does not match grid {grid.shape}", off)
    off = 12 + 4 * dim
    need(off, 8, "time")
    (t,) = struct.unpack_from("<d", buf, off)
    off += 8
    size = int(np.prod(counts))
    need(off, 8 * size, "u")
    u = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(counts).astype(float)
    off += 8 * size
    need(off, 8 * size, "v")
    v = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(counts).astype(float)
    off += 8 * size
    if off != n:
        raise SnapshotError(f"{n - off} trailing bytes after v", off)
    return State(u, v, float(t))


def write_snapshot(state: State, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_snapshot(state))


def read_snapshot(path, grid: Grid | None = None) -> State:
    """Read a snapshot, optionally checking its shape against ``grid``."""
    with open(path, "rb") as fh:
        return decode_snapshot(fh.read(), grid)
