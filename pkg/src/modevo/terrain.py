"""Plain and rough heightfield environments.

A heightmap covers the square ``[-extent/2, extent/2]^2`` centred on the spawn
point. Heights live on the lattice corners (``resolution + 1`` per side), each
cell is a quadrilateral face, and queries interpolate bilinearly. Queries
outside the square are clamped to the border.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

DEFAULT_EXTENT = 20.0
DEFAULT_CELL = 0.1
DEFAULT_AMPLITUDE = 0.08
DEFAULT_WAVELENGTH = 0.8


@dataclass(frozen=True, eq=False)
class Heightmap:
    resolution: int
    cell_size: float
    heights: np.ndarray
    amplitude: float = 0.0
    wavelength: float = 0.0
    seed: int = 0

    @property
    def extent(self) -> float:
        return self.resolution * self.cell_size

    @property
    def origin(self) -> float:
        return -0.5 * self.extent

    @property
    def is_plain(self) -> bool:
        return self.amplitude == 0.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Heightmap):
            return NotImplemented
        return (self.resolution, self.cell_size, self.amplitude, self.wavelength, self.seed) == (
            other.resolution, other.cell_size, other.amplitude, other.wavelength, other.seed
        ) and np.array_equal(self.heights, other.heights)

    def height_at(self, x: float, y: float) -> float:
        return height_at(self, x, y)

    def normal_at(self, x: float, y: float) -> np.ndarray:
        return normal_at(self, x, y)

    def contains(self, x: float, y: float) -> bool:
        half = 0.5 * self.extent
        return -half <= x <= half and -half <= y <= half


def _resolution(extent: float, cell_size: float) -> int:
    if extent <= 0 or cell_size <= 0:
        raise ValueError("extent and cell_size must be positive")
    n = round(extent / cell_size)
    if n < 1 or not math.isclose(n * cell_size, extent, rel_tol=1e-9):
        raise ValueError(f"extent {extent} is not a whole number of {cell_size} m cells")
    return n


def plain(extent: float = DEFAULT_EXTENT, cell_size: float = DEFAULT_CELL) -> Heightmap:
    n = _resolution(extent, cell_size)
    return Heightmap(n, cell_size, np.zeros((n + 1, n + 1)))


def rough(extent: float = DEFAULT_EXTENT, amplitude: float = DEFAULT_AMPLITUDE,
          wavelength: float = DEFAULT_WAVELENGTH, seed: int = 0,
          cell_size: float = DEFAULT_CELL) -> Heightmap:
    """Single-octave value noise: random lattice values every ``wavelength``
    metres, cosine-interpolated onto the cell corners and scaled to ``amplitude``.
    """
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    if wavelength <= 2 * cell_size:
        raise ValueError("wavelength must exceed two cells")
    n = _resolution(extent, cell_size)
    lattice_n = int(math.ceil(extent / wavelength)) + 1
    rng = np.random.Generator(np.random.PCG64(seed))
    lattice = rng.uniform(-1.0, 1.0, size=(lattice_n + 1, lattice_n + 1))

    coords = np.arange(n + 1) * cell_size / wavelength
    base = np.floor(coords).astype(int)
    frac = coords - base
    blend = (1.0 - np.cos(np.pi * frac)) / 2.0
    # rows index x, columns index y
    i0, i1 = base[:, None], base[:, None] + 1
    j0, j1 = base[None, :], base[None, :] + 1
    bx, by = blend[:, None], blend[None, :]
    low = lattice[i0, j0] * (1 - by) + lattice[i0, j1] * by
    high = lattice[i1, j0] * (1 - by) + lattice[i1, j1] * by
    heights = amplitude * (low * (1 - bx) + high * bx)
    return Heightmap(n, cell_size, heights, amplitude, wavelength, seed)


@njit(cache=True)
def sample_height(heights: np.ndarray, origin: float, cell_size: float, x: float, y: float) -> float:
    n = heights.shape[0] - 1
    u = (x - origin) / cell_size
    v = (y - origin) / cell_size
    u = min(max(u, 0.0), float(n))
    v = min(max(v, 0.0), float(n))
    i = min(int(math.floor(u)), n - 1)
    j = min(int(math.floor(v)), n - 1)
    fu = u - i
    fv = v - j
    h00 = heights[i, j]
    h01 = heights[i, j + 1]
    h10 = heights[i + 1, j]
    h11 = heights[i + 1, j + 1]
    return (h00 * (1 - fv) + h01 * fv) * (1 - fu) + (h10 * (1 - fv) + h11 * fv) * fu


@njit(cache=True)
def sample_normal(heights: np.ndarray, origin: float, cell_size: float,
                  x: float, y: float) -> tuple[float, float, float]:
    e = 0.5 * cell_size
    dx = (sample_height(heights, origin, cell_size, x + e, y)
          - sample_height(heights, origin, cell_size, x - e, y)) / (2 * e)
    dy = (sample_height(heights, origin, cell_size, x, y + e)
          - sample_height(heights, origin, cell_size, x, y - e)) / (2 * e)
    norm = math.sqrt(dx * dx + dy * dy + 1.0)
    return -dx / norm, -dy / norm, 1.0 / norm


def height_at(hmap: Heightmap, x: float, y: float) -> float:
    return float(sample_height(hmap.heights, hmap.origin, hmap.cell_size, float(x), float(y)))


def normal_at(hmap: Heightmap, x: float, y: float) -> np.ndarray:
    return np.array(sample_normal(hmap.heights, hmap.origin, hmap.cell_size, float(x), float(y)))


def lipschitz_bound(hmap: Heightmap) -> float:
    """Slope bound of the bilinear surface, from neighbouring corner differences."""
    if hmap.resolution == 0:
        return 0.0
    gx = np.abs(np.diff(hmap.heights, axis=0)).max(initial=0.0)
    gy = np.abs(np.diff(hmap.heights, axis=1)).max(initial=0.0)
    return float(math.hypot(gx, gy) / hmap.cell_size)


# -- plain-text grid files -------------------------------------------------

def export_grid(hmap: Heightmap, path: str | Path) -> None:
    lines = [
        f"resolution {hmap.resolution}",
        f"cell_size {hmap.cell_size!r}",
        f"amplitude {hmap.amplitude!r}",
        f"wavelength {hmap.wavelength!r}",
        f"seed {hmap.seed}",
    ]
    lines += [" ".join(repr(float(v)) for v in row) for row in hmap.heights]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_grid(path: str | Path) -> Heightmap:
    rows = Path(path).read_text(encoding="utf-8").splitlines()
    header = {}
    for line in rows[:5]:
        key, _, value = line.partition(" ")
        header[key] = value
    for key in ("resolution", "cell_size", "amplitude", "wavelength", "seed"):
        if key not in header:
            raise ValueError(f"grid file missing header field {key!r}")
    n = int(header["resolution"])
    heights = np.array([[float(v) for v in line.split()] for line in rows[5:] if line.strip()])
    if heights.shape != (n + 1, n + 1):
        raise ValueError(f"grid file has shape {heights.shape}, expected {(n + 1, n + 1)}")
    return Heightmap(n, float(header["cell_size"]), heights, float(header["amplitude"]),
                     float(header["wavelength"]), int(header["seed"]))
