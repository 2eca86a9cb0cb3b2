"""AFWT: a versioned, checksummed binary weight-file format.

Layout (all integers little-endian):

    magic  b"AFWT"
    u32    format version (currently 1)
    u16+s  architecture id (utf-8)
    u16+s  head tag (utf-8)
    u32    tensor record count
    record * count:
        u16+s  tensor name
        u8     dtype tag (0 = f32, 1 = f64)
        u8     rank
        u32    dim, repeated rank times
        pad    zero bytes to the next 8-byte boundary
        raw    values, little-endian, row-major
    u32    CRC32 of every preceding byte

Loading is data-only: the architecture graph is rebuilt from the stored id
and every tensor's shape is checked against it before anything is accepted.
Batch-norm running statistics are stored alongside trainable weights so an
inference model round-trips bit-exactly; optimiser state is not stored.
"""

from __future__ import annotations

import io
import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import architectures
from .tensor import Tensor

MAGIC = b"AFWT"
FORMAT_VERSION = 1
_DTYPE_TAGS = {"f32": 0, "f64": 1}
_TAG_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAG_NAMES = {0: "f32", 1: "f64"}

# Guard against hostile dimension declarations before allocating.
MAX_TENSOR_BYTES = 64 * 1024 * 1024


class ModelIOError(ValueError):
    pass


def _write_str(buf, text):
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ModelIOError("string field too long")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _pad8(buf):
    buf.write(b"\x00" * (-buf.tell() % 8))


def save(model, path) -> int:
    """Serialize a model's tensors; returns the byte count written."""
    tensors = model.named_tensors()
    if not tensors:
        raise ModelIOError("model has no parameters to save")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    _write_str(buf, model.arch_id or "")
    _write_str(buf, model.head or "")
    buf.write(struct.pack("<I", len(tensors)))
    for name, tensor in tensors.items():
        _write_str(buf, name)
        buf.write(struct.pack("<BB", _DTYPE_TAGS[tensor.dtype], len(tensor.shape)))
        buf.write(struct.pack(f"<{len(tensor.shape)}I", *tensor.shape))
        _pad8(buf)
        buf.write(tensor.array.astype(_TAG_DTYPES[_DTYPE_TAGS[tensor.dtype]]).tobytes(order="C"))
    payload = buf.getvalue()
    blob = payload + struct.pack("<I", zlib.crc32(payload))
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise ModelIOError("file truncated")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return self.take(1)[0]

    def u16(self):
        return struct.unpack("<H", self.take(2))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def string(self):
        return self.take(self.u16()).decode("utf-8")

    def align8(self):
        self.take(-self.pos % 8)


def _parse(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 8:
        raise ModelIOError(f"{path}: not a weight file (too short)")
    payload, crc_raw = blob[:-4], blob[-4:]
    if struct.unpack("<I", crc_raw)[0] != zlib.crc32(payload):
        raise ModelIOError(f"{path}: CRC mismatch; file is corrupt or truncated")
    r = _Reader(payload)
    if r.take(4) != MAGIC:
        raise ModelIOError(f"{path}: bad magic; not a weight file")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise ModelIOError(f"{path}: unsupported format version {version}")
    arch_id = r.string()
    head = r.string()
    count = r.u32()
    records = []
    for _ in range(count):
        name = r.string()
        tag = r.u8()
        if tag not in _TAG_DTYPES:
            raise ModelIOError(f"{path}: unknown dtype tag {tag} for {name!r}")
        rank = r.u8()
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank))
        nbytes = int(np.prod(dims)) * _TAG_DTYPES[tag].itemsize if rank else 0
        if nbytes > MAX_TENSOR_BYTES:
            raise ModelIOError(
                f"{path}: tensor {name!r} declares {nbytes} bytes, over the "
                f"{MAX_TENSOR_BYTES} limit"
            )
        r.align8()
        values = np.frombuffer(r.take(nbytes), dtype=_TAG_DTYPES[tag]).reshape(dims)
        records.append((name, _TAG_NAMES[tag], values))
    if r.pos != len(payload):
        raise ModelIOError(f"{path}: {len(payload) - r.pos} trailing bytes after records")
    return arch_id, head, records


def load(path):
    """Reconstruct a model from a weight file, verifying shapes against its
    declared architecture."""
    arch_id, head, records = _parse(path)
    if arch_id not in architectures.ARCH_IDS:
        raise ModelIOError(f"{path}: unknown architecture id {arch_id!r}")
    dtype = records[0][1] if records else "f32"
    model = architectures.build(arch_id, head, seed=0, dtype=dtype)
    expected = model.named_tensors()
    seen = set()
    for name, dt, values in records:
        if name not in expected:
            raise ModelIOError(f"{path}: tensor {name!r} does not belong to {arch_id}")
        if tuple(values.shape) != expected[name].shape:
            raise ModelIOError(
                f"{path}: tensor {name!r} has shape {tuple(values.shape)}, "
                f"but {arch_id} expects {expected[name].shape}"
            )
        native = np.float32 if dt == "f32" else np.float64
        model.stack.set_param(name, Tensor.wrap(values.astype(native)))
        seen.add(name)
    missing = set(expected) - seen
    if missing:
        raise ModelIOError(f"{path}: file lacks tensors: {sorted(missing)[:3]} ...")
    return model


@dataclass
class ModelInfo:
    arch_id: str
    head: str
    total_params: int
    bytes: int
    tensors: list  # (name, dtype, shape, count)

    def to_text(self) -> str:
        lines = [
            f"arch:   {self.arch_id}",
            f"head:   {self.head}",
            f"params: {self.total_params:,}",
            f"bytes:  {self.bytes:,} ({self.bytes / 1e6:.2f} MB)",
            "",
            f"{'tensor':<24} {'dtype':<5} {'shape':<20} {'count':>10}",
        ]
        for name, dtype, shape, count in self.tensors:
            lines.append(f"{name:<24} {dtype:<5} {str(shape):<20} {count:>10,}")
        return "\n".join(lines)


def model_info(path) -> ModelInfo:
    arch_id, head, records = _parse(path)
    tensors = [(name, dt, tuple(v.shape), int(v.size)) for name, dt, v in records]
    return ModelInfo(
        arch_id=arch_id,
        head=head,
        total_params=sum(c for *_, c in tensors),
        bytes=os.path.getsize(path),
        tensors=tensors,
    )
