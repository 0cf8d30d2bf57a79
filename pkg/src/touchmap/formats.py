"""Bit-exact binary containers for tensors (TVT1) and checkpoints (TVM1).

TVT1 layout: magic `TVT1` | dtype code u8 (1 = f32) | ndim u8 |
ndim x u32-LE extents | row-major f32-LE payload.

TVM1 layout: magic `TVM1` | u32-LE parameter count | per parameter:
u16-LE name length | UTF-8 name | u8 ndim | ndim x u32-LE extents |
row-major f32-LE payload.

Both formats use fixed little-endian encodings so save/load round-trips are
byte-identical on any host, which the pipeline's determinism contract
depends on.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .errors import BadDtypeError, BadMagicError, FormatError, ShapeError, TruncatedFileError

__all__ = [
    "TENSOR_MAGIC",
    "CHECKPOINT_MAGIC",
    "save_tensor",
    "load_tensor",
    "tensor_to_bytes",
    "tensor_from_bytes",
    "save_checkpoint",
    "load_checkpoint",
]

TENSOR_MAGIC = b"TVT1"
CHECKPOINT_MAGIC = b"TVM1"
_DTYPE_F32 = 1
_MAX_NDIM = 8


def _read_exact(buf: io.BufferedIOBase, n: int, what: str) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"file ends inside {what} ({len(data)}/{n} bytes)")
    return data


def _write_array(out: io.BufferedIOBase, arr: np.ndarray) -> None:
    if arr.ndim > _MAX_NDIM:
        raise ShapeError(f"tensor rank {arr.ndim} exceeds supported maximum {_MAX_NDIM}")
    out.write(struct.pack("<B", arr.ndim))
    for extent in arr.shape:
        out.write(struct.pack("<I", extent))
    out.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_array(buf: io.BufferedIOBase, what: str) -> np.ndarray:
    (ndim,) = struct.unpack("<B", _read_exact(buf, 1, f"{what} ndim"))
    if ndim > _MAX_NDIM:
        raise FormatError(f"{what}: rank {ndim} exceeds supported maximum {_MAX_NDIM}")
    shape = struct.unpack(f"<{ndim}I", _read_exact(buf, 4 * ndim, f"{what} extents"))
    count = 1
    for extent in shape:
        count *= extent
    payload = _read_exact(buf, 4 * count, f"{what} payload")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    """Serialize a float array into the TVT1 container."""
    arr = np.asarray(arr, dtype=np.float32)
    out = io.BytesIO()
    out.write(TENSOR_MAGIC)
    out.write(struct.pack("<B", _DTYPE_F32))
    _write_array(out, arr)
    return out.getvalue()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    """Parse a TVT1 container; trailing garbage is rejected."""
    buf = io.BytesIO(data)
    magic = _read_exact(buf, 4, "magic")
    if magic != TENSOR_MAGIC:
        raise BadMagicError(f"expected magic {TENSOR_MAGIC!r}, found {magic!r}")
    (code,) = struct.unpack("<B", _read_exact(buf, 1, "dtype code"))
    if code != _DTYPE_F32:
        raise BadDtypeError(f"unsupported dtype code {code} (only {_DTYPE_F32} = f32)")
    arr = _read_array(buf, "tensor")
    if buf.read(1):
        raise FormatError("trailing bytes after tensor payload")
    return arr


def save_tensor(path: str | Path, arr: np.ndarray) -> None:
    Path(path).write_bytes(tensor_to_bytes(arr))


def load_tensor(path: str | Path) -> np.ndarray:
    return tensor_from_bytes(Path(path).read_bytes())


def save_checkpoint(path: str | Path, state: dict[str, np.ndarray]) -> None:
    """Write named parameter arrays in insertion order."""
    out = io.BytesIO()
    out.write(CHECKPOINT_MAGIC)
    out.write(struct.pack("<I", len(state)))
    for name, arr in state.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise FormatError(f"parameter name too long ({len(encoded)} bytes)")
        out.write(struct.pack("<H", len(encoded)))
        out.write(encoded)
        _write_array(out, np.asarray(arr, dtype=np.float32))
    Path(path).write_bytes(out.getvalue())


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """Read a TVM1 checkpoint back into an ordered name->array mapping."""
    buf = io.BytesIO(Path(path).read_bytes())
    magic = _read_exact(buf, 4, "magic")
    if magic != CHECKPOINT_MAGIC:
        raise BadMagicError(f"expected magic {CHECKPOINT_MAGIC!r}, found {magic!r}")
    (count,) = struct.unpack("<I", _read_exact(buf, 4, "parameter count"))
    state: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _read_exact(buf, 2, "name length"))
        try:
            name = _read_exact(buf, name_len, "parameter name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"parameter name is not valid UTF-8: {exc}") from exc
        if name in state:
            raise FormatError(f"duplicate parameter {name!r} in checkpoint")
        state[name] = _read_array(buf, f"parameter {name!r}")
    if buf.read(1):
        raise FormatError("trailing bytes after last parameter")
    return state
