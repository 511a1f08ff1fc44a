"""Little-endian binary container used for every persisted artifact.

Layout::

    magic      4 bytes   identifies the payload kind (see KINDS)
    version    uint32    FORMAT_VERSION
    n_fields   uint32
    n_fields times:
        name_len  uint16, name  utf-8 bytes
        dtype     1 byte    b"d" float64 | b"f" float32 | b"q" int64
        ndim      uint8
        dims      ndim x uint32
        data      little-endian values, C order

Scalars are stored as 0-d arrays. Field order is the insertion order of the
mapping passed to ``write_container``, so equal inputs give equal bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

FORMAT_VERSION = 1

KINDS = {
    b"SNWT": "zca-transform",
    b"SNWK": "whitening-kernels",
    b"SNDG": "dog-config",
    b"SNLY": "snn-layer",
    b"SNFV": "feature-vectors",
}

_DTYPES = {b"d": np.dtype("<f8"), b"f": np.dtype("<f4"), b"q": np.dtype("<i8")}
_CODES = {np.dtype(np.float64): b"d", np.dtype(np.float32): b"f", np.dtype(np.int64): b"q"}


def write_container(path, magic: bytes, fields: dict) -> Path:
    if magic not in KINDS:
        raise ValueError(f"unknown container magic {magic!r}")
    chunks = [magic, struct.pack("<II", FORMAT_VERSION, len(fields))]
    for name, value in fields.items():
        arr = np.asarray(value)
        if arr.dtype.kind in "iub":
            arr = arr.astype(np.int64)
        elif arr.dtype not in _CODES:
            arr = arr.astype(np.float64)
        code = _CODES[arr.dtype]
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(code + struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    path = Path(path)
    path.write_bytes(b"".join(chunks))
    return path


def read_container(path) -> tuple[bytes, dict]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing file: {path}")
    buf = path.read_bytes()
    try:
        magic = buf[:4]
        if magic not in KINDS:
            raise FormatError(f"{path}: unknown magic {magic!r}")
        version, n_fields = struct.unpack_from("<II", buf, 4)
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported container version {version}")
        pos = 12
        fields = {}
        for _ in range(n_fields):
            (name_len,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos:pos + name_len].decode("utf-8")
            pos += name_len
            code = buf[pos:pos + 1]
            (ndim,) = struct.unpack_from("<B", buf, pos + 1)
            pos += 2
            dims = struct.unpack_from(f"<{ndim}I", buf, pos)
            pos += 4 * ndim
            dtype = _DTYPES[code]
            count = int(np.prod(dims)) if ndim else 1
            nbytes = count * dtype.itemsize
            if pos + nbytes > len(buf):
                raise FormatError(f"{path}: truncated field {name!r}")
            arr = np.frombuffer(buf, dtype=dtype, count=count, offset=pos).reshape(dims)
            fields[name] = arr.astype(dtype.newbyteorder("="))
            pos += nbytes
    except (struct.error, KeyError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: malformed container ({exc})") from exc
    if pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - pos} trailing bytes")
    return magic, fields


def peek_kind(path) -> str:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing file: {path}")
    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic not in KINDS:
        raise FormatError(f"{path}: unknown magic {magic!r}")
    return KINDS[magic]
