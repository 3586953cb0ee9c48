"""Binary matrix container shared by the feature cache and saved maps.

Layout: 8-byte magic, u32 version, 32-byte metadata hash, u64 rows, u64
cols, then rows*cols little-endian float32 values in row-major order. The
hash field ties a payload to whatever configuration produced it; readers
that know the expected hash can detect mismatched caches.

Note the payload is float32: higher-precision matrices round on save.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import IoFailure

MAGIC = b"PLSMAT\x00\x01"
VERSION = 1
_HEADER = struct.Struct("<8sI32sQQ")


def write_matrix(path: str | Path, values: np.ndarray,
                 meta_hash: bytes = b"\x00" * 32) -> None:
    values = np.asarray(values)
    if values.ndim != 2:
        raise IoFailure(f"container holds 2-d matrices, got shape {values.shape}")
    if len(meta_hash) != 32:
        raise IoFailure(f"meta hash must be 32 bytes, got {len(meta_hash)}")
    payload = np.ascontiguousarray(values, dtype="<f4")
    header = _HEADER.pack(MAGIC, VERSION, meta_hash,
                          values.shape[0], values.shape[1])
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_matrix(path: str | Path) -> tuple[np.ndarray, bytes]:
    """Returns (float32 matrix, metadata hash)."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise IoFailure(f"{path}: truncated header")
    magic, version, meta_hash, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise IoFailure(f"{path}: not a matrix container")
    if version != VERSION:
        raise IoFailure(f"{path}: unsupported container version {version}")
    expected = _HEADER.size + rows * cols * 4
    if len(blob) != expected:
        raise IoFailure(
            f"{path}: payload is {len(blob) - _HEADER.size} bytes, "
            f"expected {expected - _HEADER.size}"
        )
    values = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    return values.reshape(rows, cols).copy(), meta_hash
