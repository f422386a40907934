"""Voxel density field and the structure penetration energy.

The grid is a node-centered, axis-aligned field of nonnegative densities
sampled trilinearly; queries outside the node bounds read as free space
(density 0). The binary format is documented in the README and enforced
here: a little-endian header (magic "DGRD", version u32, dims 3 x u32,
origin 3 x f64, voxel_size f64) followed by nx*ny*nz float32 values,
x-fastest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import SchemaError

GRID_MAGIC = b"DGRD"
GRID_VERSION = 1
_HEADER = struct.Struct("<4sIIII3dd")


@dataclass(frozen=True)
class DensityGrid:
    """Axis-aligned voxel field standing in for a learned density model."""

    origin: np.ndarray
    voxel_size: float
    dims: tuple[int, int, int]
    values: np.ndarray  # flat, x-fastest: index i + nx*(j + ny*k)

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        values = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        nx, ny, nz = self.dims
        if min(self.dims) < 2:
            raise ValueError("grid dims must all be >= 2")
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if values.size != nx * ny * nz:
            raise ValueError("values length does not match dims")
        if np.any(values < 0):
            raise ValueError("densities must be nonnegative")

    @property
    def upper_corner(self) -> np.ndarray:
        return self.origin + self.voxel_size * (np.array(self.dims) - 1)

    def median_nonzero(self) -> float:
        nz = self.values[self.values > 0]
        return float(np.median(nz)) if nz.size else 0.0

    def node_index(self, i: int, j: int, k: int) -> int:
        nx, ny, _ = self.dims
        return i + nx * (j + ny * k)


def sample_density(grid: DensityGrid, points_world: np.ndarray) -> np.ndarray:
    """Trilinear density at world points (n, 3) or (3,); 0 outside bounds."""
    pts = np.asarray(points_world, dtype=float)
    single = pts.ndim == 1
    vals, _ = kernels.grid_sample(
        grid.values, grid.dims, grid.origin, grid.voxel_size, pts.reshape(-1, 3)
    )
    return float(vals[0]) if single else vals


def sample_density_grad(grid: DensityGrid, points_world: np.ndarray):
    """Densities and world-frame gradients at points (n, 3)."""
    pts = np.asarray(points_world, dtype=float).reshape(-1, 3)
    return kernels.grid_sample(
        grid.values, grid.dims, grid.origin, grid.voxel_size, pts, want_grad=True
    )


def structure_energy(grid: DensityGrid, samples, robust_scale: float) -> float:
    """Robustified penalty on total density at the body surface samples.

    energy = rho(S) with S the summed sampled density and rho the
    Geman-McClure function x^2 / (x^2 + robust_scale^2), saturating at 1.
    """
    if robust_scale <= 0:
        raise ValueError("robust_scale must be positive")
    points = samples.points if hasattr(samples, "points") else samples
    total = float(np.sum(sample_density(grid, np.asarray(points).reshape(-1, 3))))
    return total * total / (total * total + robust_scale * robust_scale)


def default_structure_scale(grid: DensityGrid, sample_count: int) -> float:
    """Auto Geman-McClure scale: 10x median nonzero density x sample count."""
    med = grid.median_nonzero()
    if med <= 0:
        return 1.0
    return 10.0 * med * max(sample_count, 1)


def write_grid(path, grid: DensityGrid) -> None:
    nx, ny, nz = grid.dims
    header = _HEADER.pack(
        GRID_MAGIC,
        GRID_VERSION,
        nx,
        ny,
        nz,
        *grid.origin.tolist(),
        grid.voxel_size,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.asarray(grid.values, dtype="<f4").tobytes())


def read_grid(path) -> DensityGrid:
    """Load a binary grid; validates the optional JSON sidecar's dims."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SchemaError(f"{path}: truncated grid header")
    magic, version, nx, ny, nz, ox, oy, oz, voxel = _HEADER.unpack_from(raw)
    if magic != GRID_MAGIC:
        raise SchemaError(f"{path}: bad magic {magic!r}")
    if version != GRID_VERSION:
        raise SchemaError(f"{path}: unsupported grid version {version}")
    count = nx * ny * nz
    body = raw[_HEADER.size :]
    if len(body) != 4 * count:
        raise SchemaError(f"{path}: expected {4 * count} value bytes, got {len(body)}")
    values = np.frombuffer(body, dtype="<f4").astype(np.float64)
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        if tuple(meta.get("dims", (nx, ny, nz))) != (nx, ny, nz):
            raise SchemaError(
                f"{sidecar}: sidecar dims {meta.get('dims')} disagree with header "
                f"{(nx, ny, nz)}",
                json_path="/dims",
            )
    return DensityGrid(
        origin=np.array([ox, oy, oz]),
        voxel_size=voxel,
        dims=(nx, ny, nz),
        values=values,
    )


def rasterize_boxes(
    origin,
    voxel_size: float,
    dims: tuple[int, int, int],
    boxes,
    density: float = 100.0,
) -> DensityGrid:
    """Constant-density rasterization of axis-aligned boxes (lo, hi) pairs."""
    nx, ny, nz = dims
    origin = np.asarray(origin, dtype=float)
    xs = origin[0] + voxel_size * np.arange(nx)
    ys = origin[1] + voxel_size * np.arange(ny)
    zs = origin[2] + voxel_size * np.arange(nz)
    field = np.zeros((nz, ny, nx))
    for lo, hi in boxes:
        mx = (xs >= lo[0]) & (xs <= hi[0])
        my = (ys >= lo[1]) & (ys <= hi[1])
        mz = (zs >= lo[2]) & (zs <= hi[2])
        field[np.ix_(mz, my, mx)] = density
    return DensityGrid(
        origin=origin, voxel_size=voxel_size, dims=dims, values=field.ravel()
    )
