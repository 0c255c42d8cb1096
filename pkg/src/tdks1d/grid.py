"""Uniform 1D grid, orbital reductions and the absorbing boundary.

Orbital sets are plain complex arrays of shape ``(n_orbitals, n_points)``;
every orbital carries occupation 2.  All spatial integrals are Riemann
sums ``sum(f) * dx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

OCCUPATION = 2.0


@dataclass(frozen=True)
class SpatialGrid:
    """Centered node grid ``x_j = -n_points*dx/2 + j*dx``."""

    n_points: int
    dx: float

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 4 or self.n_points % 2:
            raise ValueError(f"n_points must be an even integer >= 4, got {self.n_points!r}")
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx!r}")

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.n_points * self.dx + self.dx * np.arange(self.n_points)

    @property
    def half_width(self) -> float:
        return 0.5 * self.n_points * self.dx

    @property
    def length(self) -> float:
        return self.n_points * self.dx

    def index_of(self, x: float) -> int:
        """Nearest node index to position ``x``."""
        j = int(round((x + self.half_width) / self.dx))
        if not 0 <= j < self.n_points:
            raise ValueError(f"position {x} lies outside the grid")
        return j

    def mirror(self, f: np.ndarray) -> np.ndarray:
        """f(-x) on nodes 1..n-1 (node 0 has no mirror partner)."""
        return f[..., :0:-1]


def make_grid(n_points: int, dx: float) -> SpatialGrid:
    return SpatialGrid(n_points, dx)


def _check_orbitals(orbitals: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    orbitals = np.asarray(orbitals)
    if orbitals.ndim == 1:
        orbitals = orbitals[None, :]
    if orbitals.ndim != 2 or orbitals.shape[1] != grid.n_points:
        raise ValueError(
            f"orbital array shape {orbitals.shape} does not match grid of {grid.n_points} points")
    return orbitals


def density(orbitals: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """n(x) = 2 sum_i |phi_i(x)|^2."""
    orbitals = _check_orbitals(orbitals, grid)
    return OCCUPATION * (orbitals.real ** 2 + orbitals.imag ** 2).sum(axis=0)


def dipole(n: np.ndarray, grid: SpatialGrid) -> float:
    n = np.asarray(n)
    if n.shape != (grid.n_points,):
        raise ValueError(f"density shape {n.shape} does not match grid")
    return float(np.dot(grid.x, n) * grid.dx)


def orbital_dipoles(orbitals: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """d_i = int x * 2|phi_i|^2 dx, one value per orbital."""
    orbitals = _check_orbitals(orbitals, grid)
    return OCCUPATION * ((orbitals.real ** 2 + orbitals.imag ** 2) @ grid.x) * grid.dx


def derivative(f: np.ndarray, dx: float) -> np.ndarray:
    """Central-difference d/dx along the last axis, zero outside the grid."""
    out = np.empty_like(f)
    out[..., 1:-1] = f[..., 2:] - f[..., :-2]
    out[..., 0] = f[..., 1]
    out[..., -1] = -f[..., -2]
    return out / (2.0 * dx)


def current(orbitals: np.ndarray, A: float, grid: SpatialGrid) -> np.ndarray:
    """Velocity-gauge current j = sum_i 2 [Im(phi_i* dphi_i/dx) + A |phi_i|^2]."""
    orbitals = _check_orbitals(orbitals, grid)
    dphi = derivative(orbitals, grid.dx)
    j = (np.conj(orbitals) * dphi).imag.sum(axis=0)
    return OCCUPATION * j + A * density(orbitals, grid)


@dataclass(frozen=True)
class AbsorberSpec:
    """Imaginary potential -i W(x), W = strength * ramp^order on the outer edges.

    The ramp runs from 0 at ``|x| = x_start`` to 1 at the grid edge, where
    ``x_start = half_width - width_fraction * length``.
    """

    width_fraction: float = 0.15
    strength: float = 0.2
    order: int = 4

    def __post_init__(self):
        if not 0 < self.width_fraction < 0.5:
            raise ValueError("width_fraction must lie in (0, 0.5)")
        if self.strength < 0:
            raise ValueError("absorber strength must be non-negative")
        if self.order < 1:
            raise ValueError("absorber order must be >= 1")

    def start(self, grid: SpatialGrid) -> float:
        return grid.half_width - self.width_fraction * grid.length

    def potential(self, grid: SpatialGrid) -> np.ndarray:
        x_start = self.start(grid)
        ramp = np.clip((np.abs(grid.x) - x_start) / (grid.half_width - x_start), 0.0, None)
        return self.strength * ramp ** self.order

    def mask(self, grid: SpatialGrid, dt: float) -> np.ndarray:
        """Per-step damping factor exp(-W dt)."""
        return np.exp(-self.potential(grid) * dt)

    def check_surfaces(self, grid: SpatialGrid, *positions: float) -> None:
        x_start = self.start(grid)
        for x in positions:
            if abs(x) >= x_start:
                raise ValueError(
                    f"surface at x={x} lies inside the absorber (starts at |x|={x_start})")


def apply_absorber(orbitals: np.ndarray, absorber: AbsorberSpec, grid: SpatialGrid,
                   dt: float) -> np.ndarray:
    orbitals = _check_orbitals(orbitals, grid)
    return orbitals * absorber.mask(grid, dt)
