"""
Binary model files.

Layout, all integers unsigned 32-bit little-endian:

    b"RDNC" | version | depth | K | filters | array count
    then per array: name length | name (utf-8) | rank | dims... | float32 LE payload

K = 0 marks a denoiser-only file.
"""
import logging
import struct
from pathlib import Path

import numpy as np

from .errors import ArgumentError, FormatError, ShapeError
from .mm_cascade import CascadeParams
from .resdnet import ResDNetParams

logger = logging.getLogger(__name__)

MAGIC = b"RDNC"
VERSION = 1
_U32 = struct.Struct("<I")
_PAYLOAD = np.dtype("<f4")


def _pack(params):
    if isinstance(params, CascadeParams):
        denoiser, k = params.denoiser, params.K
    elif isinstance(params, ResDNetParams):
        denoiser, k = params, 0
    else:
        raise ShapeError(f"cannot serialise {type(params).__name__}")
    arrays = params.named_arrays()
    chunks = [MAGIC, struct.pack("<5I", VERSION, denoiser.depth, k, denoiser.filters, len(arrays))]
    for name, arr in arrays.items():
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack(f"<{1 + arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype=_PAYLOAD).tobytes())
    return b"".join(chunks)


def save_model(params, path):
    """Write a CascadeParams or a bare ResDNetParams (K = 0)."""
    Path(path).write_bytes(_pack(params))
    logger.debug("saved model to %s", path)


class _Reader:
    def __init__(self, raw):
        self.raw = raw
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.raw):
            raise FormatError(f"truncated file while reading {what}", offset=self.pos)
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what):
        return _U32.unpack(self.take(4, what))[0]


def _unpack(raw, dtype):
    reader = _Reader(raw)
    if reader.take(4, "magic") != MAGIC:
        raise FormatError("bad magic, not a model file", offset=0)
    version = reader.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    depth, k, filters, count = (reader.u32(f) for f in ("depth", "K", "filters", "array count"))
    arrays = {}
    for _ in range(count):
        start = reader.pos
        name_len = reader.u32("name length")
        try:
            name = reader.take(name_len, "array name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("array name is not valid utf-8", offset=start + 4) from None
        rank = reader.u32(f"rank of {name}")
        dims = tuple(reader.u32(f"dims of {name}") for _ in range(rank))
        n = int(np.prod(dims, dtype=np.int64))
        payload = reader.take(n * _PAYLOAD.itemsize, f"payload of {name}")
        arrays[name] = np.frombuffer(payload, dtype=_PAYLOAD).reshape(dims).astype(dtype)
    if reader.pos != len(raw):
        raise FormatError(f"{len(raw) - reader.pos} trailing bytes", offset=reader.pos)
    try:
        params = CascadeParams.from_named_arrays(arrays) if k else ResDNetParams.from_named_arrays(arrays)
    except (ShapeError, ArgumentError) as err:
        raise FormatError(f"inconsistent parameter set: {err}") from None
    denoiser = params.denoiser if k else params
    if denoiser.depth != depth or denoiser.filters != filters or (k and params.K != k):
        raise FormatError(f"metadata (D={depth}, K={k}, F={filters}) does not match the stored arrays", offset=8)
    return params


def load_model(path, dtype=np.float64):
    """Load a model file; returns CascadeParams, or ResDNetParams for denoiser-only files."""
    return _unpack(Path(path).read_bytes(), dtype)


def load_denoiser(path, dtype=np.float64):
    """Load the denoiser of any model file."""
    params = load_model(path, dtype)
    return params.denoiser if isinstance(params, CascadeParams) else params
