"""Binary cache for assembled operator matrices.

Layout (all integers little-endian):

    magic   4 bytes  b"RLMX"
    version u16      format version (1)
    d       u16
    K       u32
    dtype   u8       0 = complex64, 1 = complex128
    llabel  u32      label length in bytes
    label   utf-8 bytes
    sha256  32 bytes checksum of the payload
    N       u64      matrix side
    payload N*N row-major complex values, little-endian

The checksum is verified on load; mismatches raise ``CacheError`` rather
than returning corrupt matrices.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile

import numpy as np

from .quantize import OperatorMatrix, enumerate_frequencies

_MAGIC = b"RLMX"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIB")
_DTYPES = {0: np.dtype("<c8"), 1: np.dtype("<c16")}


class CacheError(RuntimeError):
    pass


def save_operator(path, om: OperatorMatrix, single_precision: bool = False) -> None:
    """Write an operator matrix atomically (temp file + rename)."""
    dtype_code = 0 if single_precision else 1
    payload = np.ascontiguousarray(om.entries.astype(_DTYPES[dtype_code])).tobytes()
    digest = hashlib.sha256(payload).digest()
    label = om.label.encode("utf-8")
    head = _HEADER.pack(_MAGIC, _VERSION, om.basis.d, om.basis.K, dtype_code)
    blob = (
        head
        + struct.pack("<I", len(label))
        + label
        + digest
        + struct.pack("<Q", om.size)
        + payload
    )
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rlmx-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_operator(path, budget: int | None = None) -> OperatorMatrix:
    """Read a cached matrix, verifying the checksum and rebuilding the basis."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size + 4:
        raise CacheError(f"{path}: truncated header")
    magic, version, d, K, dtype_code = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise CacheError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise CacheError(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPES:
        raise CacheError(f"{path}: unknown dtype code {dtype_code}")
    off = _HEADER.size
    (llabel,) = struct.unpack_from("<I", blob, off)
    off += 4
    label = blob[off : off + llabel].decode("utf-8")
    off += llabel
    digest = blob[off : off + 32]
    off += 32
    (N,) = struct.unpack_from("<Q", blob, off)
    off += 8
    payload = blob[off:]
    expected = N * N * _DTYPES[dtype_code].itemsize
    if len(payload) != expected:
        raise CacheError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    if hashlib.sha256(payload).digest() != digest:
        raise CacheError(f"{path}: checksum mismatch")
    basis = enumerate_frequencies(d, K, budget=budget)
    if basis.size != N:
        raise CacheError(f"{path}: matrix side {N} does not match basis size {basis.size}")
    entries = np.frombuffer(payload, dtype=_DTYPES[dtype_code]).reshape(N, N)
    return OperatorMatrix(
        basis=basis, entries=entries.astype(np.complex128), label=label
    )
