"""Reader and writer for the AAWF tensor container.

Layout: magic ``AAWF0001``, u64 LE header length, UTF-8 JSON header, zero
padding to 64 bytes, then little-endian row-major f32 tensors. Each
record's ``byte_offset`` is relative to the data section and 64-byte
aligned; ``crc32`` covers the tensor's own bytes (not the padding).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"AAWF0001"
FORMAT_VERSION = 1
ALIGN = 64


class FormatError(ValueError):
    pass


class ChecksumError(ValueError):
    def __init__(self, tensor: str, expected: int, actual: int):
        super().__init__(f"checksum mismatch in tensor `{tensor}`: expected {expected:08x}, got {actual:08x}")
        self.tensor = tensor
        self.expected = expected
        self.actual = actual


def _align(n: int) -> int:
    return -(-n // ALIGN) * ALIGN


@dataclass
class Container:
    kind: str
    extra: dict
    records: list[dict]
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    file_hash: str = ""


def to_bytes(kind: str, extra: dict, tensors: list[tuple[str, np.ndarray]]) -> bytes:
    records = []
    chunks = []
    offset = 0
    for name, array in tensors:
        data = np.ascontiguousarray(array, dtype="<f4").tobytes()
        records.append(
            {
                "name": name,
                "shape": list(array.shape),
                "dtype": "f32",
                "byte_offset": offset,
                "crc32": zlib.crc32(data),
            }
        )
        padded = _align(len(data))
        chunks.append(data + b"\0" * (padded - len(data)))
        offset += padded
    header = {"format_version": FORMAT_VERSION, "kind": kind, **extra, "tensors": records}
    header_bytes = json.dumps(header, separators=(",", ":"), ensure_ascii=False).encode()
    prefix = MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes
    return prefix + b"\0" * (_align(len(prefix)) - len(prefix)) + b"".join(chunks)


def write_container(path, kind: str, extra: dict, tensors: list[tuple[str, np.ndarray]]) -> str:
    """Write atomically; returns the hex SHA-256 of the file."""
    path = Path(path)
    data = to_bytes(kind, extra, tensors)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".partial")
    umask = os.umask(0)
    os.umask(umask)
    try:
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return hashlib.sha256(data).hexdigest()


def parse_header(data: bytes) -> tuple[dict, int]:
    """Returns the header and the start of the data section."""
    if len(data) < 16 or data[:4] != MAGIC[:4]:
        raise FormatError("not an AAWF file (bad magic)")
    if data[:8] != MAGIC:
        raise FormatError(f"unsupported format version {data[4:8]!r}")
    (length,) = struct.unpack("<Q", data[8:16])
    if 16 + length > len(data):
        raise FormatError("header length exceeds file size")
    try:
        header = json.loads(data[16 : 16 + length])
    except ValueError as e:
        raise FormatError(f"malformed header: {e}") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {header.get('format_version')}")
    return header, _align(16 + length)


def tensor_bytes(data: bytes, start: int, record: dict) -> bytes:
    begin = start + record["byte_offset"]
    return data[begin : begin + 4 * int(np.prod(record["shape"], dtype=np.int64))]


def read_container(path, verify: bool = True) -> Container:
    data = Path(path).read_bytes()
    header, start = parse_header(data)
    records = header.pop("tensors")
    kind = header.pop("kind")
    header.pop("format_version")
    c = Container(kind=kind, extra=header, records=records, file_hash=hashlib.sha256(data).hexdigest())
    for r in records:
        if r["dtype"] != "f32":
            raise FormatError(f"tensor `{r['name']}` has unsupported dtype {r['dtype']}")
        if r["byte_offset"] % ALIGN:
            raise FormatError(f"tensor `{r['name']}` offset {r['byte_offset']} is not {ALIGN}-byte aligned")
        raw = tensor_bytes(data, start, r)
        n = int(np.prod(r["shape"], dtype=np.int64))
        actual = zlib.crc32(raw)
        if verify and (len(raw) != 4 * n or actual != r["crc32"]):
            raise ChecksumError(r["name"], r["crc32"], actual)
        c.tensors[r["name"]] = np.frombuffer(raw, dtype="<f4").reshape(r["shape"])
    return c
