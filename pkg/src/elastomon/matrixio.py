"""Binary persistence for dense matrices.

Layout (little-endian throughout):

    offset  size  field
    0       4     magic b"EMNT"
    4       4     format version, u32 (currently 1)
    8       8     rows, u64
    16      8     cols, u64
    24      1     symmetry flag, u8 (0 or 1)
    25      32    provenance digest (sha256 of the producing scenario+role)
    57      -     payload: rows*cols float64 values, row-major

Round-trips are bit-exact. Loading verifies the payload length, and a set
symmetry flag additionally requires the stored matrix to be symmetric to
1e-8 in relative max-norm.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"EMNT"
VERSION = 1
_HEADER = struct.Struct("<4sIQQB32s")
SYMMETRY_TOL = 1e-8


class MatrixFileError(IOError):
    """Corrupt, truncated or inconsistent matrix file."""


@dataclass(frozen=True)
class MatrixHeader:
    rows: int
    cols: int
    symmetric: bool
    provenance: bytes


def write_matrix(path, A: np.ndarray, symmetric: bool, provenance: bytes = b"") -> None:
    """Write a dense float64 matrix; ``provenance`` is zero-padded to 32 bytes."""
    A = np.ascontiguousarray(np.asarray(A, dtype="<f8"))
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {A.shape}")
    prov = bytes(provenance)[:32].ljust(32, b"\0")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, A.shape[0], A.shape[1], int(bool(symmetric)), prov))
        fh.write(A.tobytes(order="C"))


def read_matrix(path, expect_provenance: bytes | None = None) -> tuple[np.ndarray, MatrixHeader]:
    """Read a matrix file, verifying magic, size and the symmetry contract."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise MatrixFileError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, rows, cols, symflag, prov = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise MatrixFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise MatrixFileError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + rows * cols * 8
    if len(blob) != expected:
        raise MatrixFileError(
            f"{path}: payload length mismatch (have {len(blob) - _HEADER.size} bytes, "
            f"need {rows * cols * 8})"
        )
    A = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).copy()
    if symflag:
        if rows != cols:
            raise MatrixFileError(f"{path}: symmetry flag set on a {rows}x{cols} matrix")
        scale = float(np.max(np.abs(A)))
        if scale > 0 and float(np.max(np.abs(A - A.T))) > SYMMETRY_TOL * scale:
            raise MatrixFileError(f"{path}: symmetry flag set but matrix is not symmetric")
    if expect_provenance is not None:
        want = bytes(expect_provenance)[:32].ljust(32, b"\0")
        if prov != want:
            raise MatrixFileError(
                f"{path}: provenance mismatch; artifact was produced by a different scenario"
            )
    return A, MatrixHeader(rows=rows, cols=cols, symmetric=bool(symflag), provenance=prov)
