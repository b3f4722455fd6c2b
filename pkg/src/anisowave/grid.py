"""Sampled fields on axis-aligned boxes and their binary file format.

Grid file layout (little-endian)::

    b"AWGR"  u32 version  u32 D  u64 dims[D]  f64 box[2D]  f64 data[prod(dims)]

``box`` is stored as interleaved ``lo_0, hi_0, lo_1, hi_1, ...`` and data in
row-major order with the last axis fastest.  Samples sit at cell centres.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument

GRID_MAGIC = b"AWGR"
GRID_VERSION = 1


@dataclass(frozen=True, eq=False)
class Grid:
    data: np.ndarray
    box: tuple[tuple[float, float], ...]

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if arr.ndim != len(box):
            raise InvalidArgument(f"data has {arr.ndim} axes but box has {len(box)}")
        if any(n < 2 for n in arr.shape):
            raise InvalidArgument(f"every axis needs at least 2 samples, got {arr.shape}")
        if any(hi <= lo for lo, hi in box):
            raise InvalidArgument("box must have positive extent on every axis")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("grid data must be finite")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "box", box)

    @property
    def D(self) -> int:
        return self.data.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / n for (lo, hi), n in zip(self.box, self.dims)])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coords(self, i: int) -> np.ndarray:
        lo, hi = self.box[i]
        n = self.dims[i]
        return lo + (np.arange(n) + 0.5) * (hi - lo) / n

    def coords(self) -> list[np.ndarray]:
        return [self.axis_coords(i) for i in range(self.D)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.coords(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def with_data(self, data: np.ndarray) -> "Grid":
        return Grid(data, self.box)

    @classmethod
    def sample(cls, fn: Callable, dims: Sequence[int], box) -> "Grid":
        """Evaluate ``fn(*coords)`` on the cell-centred lattice (broadcasting)."""
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        axes = [lo + (np.arange(n) + 0.5) * (hi - lo) / n for (lo, hi), n in zip(box, dims)]
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.broadcast_to(np.asarray(fn(*mesh), dtype=float), tuple(dims))
        return cls(np.array(vals), box)

    @classmethod
    def zeros(cls, dims: Sequence[int], box) -> "Grid":
        return cls(np.zeros(tuple(dims)), box)


def _box_array(box) -> np.ndarray:
    return np.array([v for pair in box for v in pair], dtype="<f8")


def write_header(fh, magic: bytes, D: int, dims, box):
    fh.write(magic)
    fh.write(struct.pack("<II", GRID_VERSION, D))
    fh.write(np.asarray(dims, dtype="<u8").tobytes())
    fh.write(_box_array(box).tobytes())


def read_header(fh, magic: bytes):
    tag = fh.read(4)
    if tag != magic:
        raise InvalidArgument(f"bad magic {tag!r}, expected {magic!r}")
    version, D = struct.unpack("<II", fh.read(8))
    if version != GRID_VERSION:
        raise InvalidArgument(f"unsupported file version {version}")
    dims = tuple(int(v) for v in np.frombuffer(fh.read(8 * D), dtype="<u8"))
    flat = np.frombuffer(fh.read(16 * D), dtype="<f8")
    box = tuple((float(flat[2 * i]), float(flat[2 * i + 1])) for i in range(D))
    return dims, box


def save_grid(grid: Grid, path):
    with open(path, "wb") as fh:
        write_header(fh, GRID_MAGIC, grid.D, grid.dims, grid.box)
        fh.write(np.ascontiguousarray(grid.data, dtype="<f8").tobytes())


def load_grid(path) -> Grid:
    with open(path, "rb") as fh:
        dims, box = read_header(fh, GRID_MAGIC)
        count = int(np.prod(dims))
        raw = fh.read(8 * count)
        if len(raw) != 8 * count:
            raise InvalidArgument("grid file is truncated")
        data = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(float)
    return Grid(data, box)
