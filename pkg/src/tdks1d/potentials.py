"""Ionic, Hartree and exchange potentials of the soft-Coulomb cluster."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .grid import SpatialGrid


@dataclass(frozen=True)
class IonicLattice:
    """Chain of ``n_ions`` unit soft-Coulomb ions centered on the origin."""

    n_ions: int = 40
    spacing: float = 1.125
    softening: float = 1.0

    def __post_init__(self):
        if self.n_ions < 1:
            raise ValueError("n_ions must be >= 1")
        if self.spacing < 0 or self.softening <= 0:
            raise ValueError("spacing must be >= 0 and softening > 0")

    @property
    def centers(self) -> np.ndarray:
        i = np.arange(1, self.n_ions + 1)
        return (-(self.n_ions + 1) / 2 + i) * self.spacing

    @property
    def extent(self) -> float:
        """Half-length of the ion chain."""
        return 0.5 * (self.n_ions - 1) * self.spacing


def ionic_potential(lattice: IonicLattice, grid: SpatialGrid) -> np.ndarray:
    x = grid.x[:, None]
    return -np.sum(1.0 / np.sqrt((x - lattice.centers[None, :]) ** 2 + lattice.softening), axis=1)


@lru_cache(maxsize=8)
def _hartree_kernel_fft(n_points: int, dx: float, softening: float) -> np.ndarray:
    # Circular layout on 2N points: offsets 0..N-1 then -(N-1)..-1, slot N unused.
    # Every pairwise offset |j - j'| <= N-1 fits, so the circular product is an
    # exact linear convolution.
    offsets = dx * np.concatenate([np.arange(n_points), [0.0], np.arange(-n_points + 1, 0)])
    kernel = 1.0 / np.sqrt(offsets ** 2 + softening)
    kernel[n_points] = 0.0
    out = sfft.rfft(kernel)
    out.setflags(write=False)
    return out


def hartree_potential(n: np.ndarray, grid: SpatialGrid, softening: float = 1.0) -> np.ndarray:
    """V_H(x) = int n(x') / sqrt((x-x')^2 + softening) dx' via zero-padded FFT."""
    N = grid.n_points
    kfft = _hartree_kernel_fft(N, float(grid.dx), float(softening))
    conv = sfft.irfft(sfft.rfft(n, 2 * N) * kfft, 2 * N)
    return conv[:N] * grid.dx


def xc_potential(n: np.ndarray) -> np.ndarray:
    """Exchange-only LDA of the 3D gas, V_x = -(3n/pi)^(1/3)."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("density must be non-negative")
    return -np.cbrt(3.0 * n / np.pi)


@dataclass(frozen=True)
class KSPotential:
    ionic: np.ndarray
    hartree: np.ndarray
    xc: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.ionic + self.hartree + self.xc


def ks_potential(lattice: IonicLattice, n: np.ndarray, grid: SpatialGrid,
                 v_ion: np.ndarray | None = None) -> KSPotential:
    if v_ion is None:
        v_ion = ionic_potential(lattice, grid)
    return KSPotential(v_ion, hartree_potential(n, grid), xc_potential(n))
