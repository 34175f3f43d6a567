"""Flat little-endian binary checkpoints.

Layout (all little-endian, no padding):

    offset  size  field
    0       8     magic  b"ATNRECK1"
    8       4     format version (uint32, currently 1)
    12      4     flags  (uint32; bit 0 = optimizer state present)
    16      16    d0, d1, d2, d3 (uint32 each)
    32      16    num_users, num_items (uint64 each)
    48      8     seed (uint64)
    56      8     leaky_slope (float64)
    64      ...   tables E, E_UC, E_IC, W0, W1, W2, P, V
                  (float64, row-major, shapes derived from the header)

When bit 0 of flags is set the tables are followed by:

    8     optimizer step count t (uint64)
    32    alpha, beta1, beta2, eps (float64 each)
    ...   first-moment tables, then second-moment tables, same order/shapes

Round-trips are bit-exact, so reloading and resuming reproduces a run."""

from __future__ import annotations

import struct

import numpy as np

from .errors import CheckpointError
from .model import TABLE_NAMES, Params
from .optim import AdamState

MAGIC = b"ATNRECK1"
VERSION = 1
_HEADER = struct.Struct("<8sII4I2QQd")
_OPT_HEADER = struct.Struct("<Q4d")
FLAG_OPTIMIZER = 1


def _table_shapes(d0, d1, d2, d3, n, m):
    return {
        "E": (n + m, d0),
        "E_UC": (n, d0),
        "E_IC": (m, d0),
        "W0": (d1, d0),
        "W1": (d3, d1),
        "W2": (d3, d1),
        "P": (d2, 2 * d1),
        "V": (d2,),
    }


def save_checkpoint(path: str, params: Params, leaky_slope: float,
                    optimizer: AdamState | None = None) -> None:
    d0, d1, d2, d3 = params.dims
    flags = FLAG_OPTIMIZER if optimizer is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, flags, d0, d1, d2, d3,
                              params.num_users, params.num_items,
                              params.seed & 0xFFFFFFFFFFFFFFFF, leaky_slope))
        for name in TABLE_NAMES:
            fh.write(np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes())
        if optimizer is not None:
            fh.write(_OPT_HEADER.pack(optimizer.t, optimizer.alpha, optimizer.beta1,
                                      optimizer.beta2, optimizer.eps))
            for store in (optimizer.m, optimizer.v):
                for name in TABLE_NAMES:
                    fh.write(np.ascontiguousarray(store[name], dtype="<f8").tobytes())


def load_checkpoint(path: str) -> tuple[Params, float, AdamState | None]:
    """Returns (params, leaky_slope, optimizer state or None)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, flags, d0, d1, d2, d3, n, m, seed, slope = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    shapes = _table_shapes(d0, d1, d2, d3, n, m)

    offset = _HEADER.size

    def read_tables():
        nonlocal offset
        out = {}
        for name in TABLE_NAMES:
            shape = shapes[name]
            count = int(np.prod(shape))
            end = offset + count * 8
            if end > len(blob):
                raise CheckpointError(f"{path}: truncated while reading {name}")
            out[name] = np.frombuffer(blob, dtype="<f8", count=count,
                                      offset=offset).reshape(shape).copy()
            offset = end
        return out

    tables = read_tables()
    params = Params(**tables, num_users=n, num_items=m, seed=seed)

    optimizer = None
    if flags & FLAG_OPTIMIZER:
        if offset + _OPT_HEADER.size > len(blob):
            raise CheckpointError(f"{path}: truncated optimizer header")
        t, alpha, beta1, beta2, eps = _OPT_HEADER.unpack_from(blob, offset)
        offset += _OPT_HEADER.size
        m_tables = read_tables()
        v_tables = read_tables()
        optimizer = AdamState(m=m_tables, v=v_tables, t=t, alpha=alpha,
                              beta1=beta1, beta2=beta2, eps=eps)
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return params, slope, optimizer
