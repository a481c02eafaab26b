"""SOFB feature-file writer.

The classifier pipeline consumes features through this wire format:
little-endian, 4-byte magic ``SOFB``, u32 version (1), u32 row count,
u32 feature dimension, then the float32 payload row-major. The format is
implemented here independently so this package stays decoupled from the
consumer.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SOFB"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


class FeatureFileWriter:
    """Streams float32 feature rows; the header is fixed up on close."""

    def __init__(self, path, dim: int):
        if dim < 1:
            raise ValueError(f"feature dimension must be >= 1, got {dim}")
        self.path = Path(path)
        self.dim = dim
        self.rows = 0
        self._fh = open(self.path, "wb")
        self._fh.write(_HEADER.pack(MAGIC, VERSION, 0, dim))

    def append(self, block: np.ndarray) -> None:
        block = np.ascontiguousarray(block, dtype="<f4")
        if block.ndim != 2 or block.shape[1] != self.dim:
            raise ValueError(f"expected (*, {self.dim}) block, got {block.shape}")
        if not np.isfinite(block).all():
            raise ValueError("feature block contains non-finite values")
        self._fh.write(block.tobytes(order="C"))
        self.rows += block.shape[0]

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.seek(8)
        self._fh.write(struct.pack("<I", self.rows))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self._fh.close()
            self.path.unlink(missing_ok=True)
        return False
