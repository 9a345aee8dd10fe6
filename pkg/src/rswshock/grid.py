"""Periodic-strip grid and the finite-difference operators shared by every module.

Fields are plain ``(n1, n2)`` float64 arrays in C order, so x2 is the fastest
index.  Cell ``(i, j)`` is centred at ``x1_min + (i + 1/2) dx1``,
``(j + 1/2) dx2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import bilinear_points


class OutOfDomain(ValueError):
    """A sample point lies outside the bounded x1 range of the grid."""


@dataclass(frozen=True)
class GridSpec:
    n1: int
    n2: int
    x1_min: float
    x1_max: float
    x2_period: float = 1.0

    def __post_init__(self):
        if int(self.n1) != self.n1 or self.n1 < 8:
            raise ValueError(f"n1 must be an integer >= 8, got {self.n1}")
        if int(self.n2) != self.n2 or self.n2 < 4:
            raise ValueError(f"n2 must be an integer >= 4, got {self.n2}")
        if not self.x1_max > self.x1_min:
            raise ValueError("x1_max must exceed x1_min")
        if not self.x2_period > 0:
            raise ValueError("x2_period must be positive")

    @property
    def dx1(self) -> float:
        return (self.x1_max - self.x1_min) / self.n1

    @property
    def dx2(self) -> float:
        return self.x2_period / self.n2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def cell_area(self) -> float:
        return self.dx1 * self.dx2

    @property
    def x1(self) -> np.ndarray:
        return self.x1_min + (np.arange(self.n1) + 0.5) * self.dx1

    @property
    def x2(self) -> np.ndarray:
        return (np.arange(self.n2) + 0.5) * self.dx2

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def shifted(self, cells: int) -> "GridSpec":
        """Same grid translated by an integer number of cells in x1."""
        d = cells * self.dx1
        return GridSpec(self.n1, self.n2, self.x1_min + d, self.x1_max + d, self.x2_period)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def to_dict(self) -> dict:
        return {"n1": self.n1, "n2": self.n2, "x1_min": self.x1_min,
                "x1_max": self.x1_max, "x2_period": self.x2_period}


def ddx1(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """4th-order d/dx1: centred inside, one-sided 5-point stencils on the two rows at each end."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] < 5:
        raise ValueError("ddx1 needs at least 5 rows")
    out = np.empty_like(f)
    out[2:-2] = (8.0 * (f[3:-1] - f[1:-3]) - (f[4:] - f[:-4])) / 12.0
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / 12.0
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / 12.0
    out[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / 12.0
    out[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / 12.0
    return out / grid.dx1


def ddx2(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """4th-order centred d/dx2 with periodic wrap."""
    f = np.asarray(f, dtype=float)
    p1 = np.roll(f, -1, axis=1)
    m1 = np.roll(f, 1, axis=1)
    p2 = np.roll(f, -2, axis=1)
    m2 = np.roll(f, 2, axis=1)
    return (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * grid.dx2)


def interp_points(fields, grid: GridSpec, x1, x2):
    """Bilinear samples of several fields at many points.

    Returns ``(values, inside)`` where ``values`` has shape ``(len(fields),) + x1.shape``;
    entries at points outside the x1 range are NaN.
    """
    x1 = np.asarray(x1, dtype=float)
    shape = x1.shape
    x1 = np.ascontiguousarray(x1.ravel())
    x2 = np.ascontiguousarray(np.broadcast_to(np.asarray(x2, dtype=float), shape).ravel())
    fields = tuple(np.ascontiguousarray(f, dtype=np.float64) for f in fields)
    out = np.empty((len(fields), x1.size))
    inside = np.empty(x1.size, dtype=np.bool_)
    if fields:
        bilinear_points(fields, grid.x1_min, grid.x1_max, grid.dx1, grid.dx2, grid.x2_period,
                        x1, x2, out, inside)
    return out.reshape((len(fields),) + shape), inside.reshape(shape)


def interp_bilinear(f: np.ndarray, grid: GridSpec, x1: float, x2: float) -> float:
    """Bilinear interpolation of cell-centred values at one point."""
    if not grid.x1_min <= x1 <= grid.x1_max:
        raise OutOfDomain(f"x1={x1} outside [{grid.x1_min}, {grid.x1_max}]")
    vals, _ = interp_points([f], grid, np.array([x1]), np.array([x2]))
    return float(vals[0, 0])


def centred_x2(x2, period: float):
    """Representative of x2 in [-period/2, period/2)."""
    return np.mod(np.asarray(x2, dtype=float) + 0.5 * period, period) - 0.5 * period
