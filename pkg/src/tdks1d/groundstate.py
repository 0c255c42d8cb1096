"""Self-consistent Kohn-Sham ground state by imaginary-time Crank-Nicolson.

Each iteration takes one imaginary-time step of all orbitals in the current
Kohn-Sham potential, re-orthonormalizes them (modified Gram-Schmidt, lowest
first), and linearly mixes the new density into the one that defines the
next potential.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import _cn
from .grid import SpatialGrid, density
from .potentials import IonicLattice, KSPotential, ionic_potential, ks_potential

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message, drift=np.inf, iterations=0):
        super().__init__(message)
        self.drift = drift
        self.iterations = iterations


@dataclass
class EnergyLevels:
    """Kohn-Sham eigenvalues in Hartree, ascending; ``first`` is the 1-based label of ``epsilons[0]``."""

    epsilons: np.ndarray
    n_occupied: int
    first: int = 1

    def __getitem__(self, label: int) -> float:
        """Level by its 1-based label, e.g. ``levels[20]`` is the HOMO of the cluster."""
        return float(self.epsilons[label - self.first])

    @property
    def labels(self) -> np.ndarray:
        return np.arange(self.first, self.first + len(self.epsilons))


@dataclass
class GroundState:
    grid: SpatialGrid
    lattice: IonicLattice
    orbitals: np.ndarray  # (n_orbitals, n_points), real-valued stored as complex
    levels: EnergyLevels
    potential: KSPotential
    iterations: int = 0
    drift: float = 0.0

    @property
    def density(self) -> np.ndarray:
        return density(self.orbitals, self.grid)


def hamiltonian_terms(v: np.ndarray, grid: SpatialGrid, A: float = 0.0):
    """Diagonal and constant off-diagonals of 1/2(-i d/dx + A)^2 - A^2/2 + V.

    Three-point Laplacian; the A d/dx term uses central differences.  The
    uniform A^2/2 shift is left out and handled as a global phase.
    """
    inv2 = 1.0 / grid.dx ** 2
    diag = inv2 + np.asarray(v, dtype=float)
    upper = complex(-0.5 * inv2, -A / (2.0 * grid.dx))
    return diag, upper, upper.conjugate()


def rayleigh_quotients(psi: np.ndarray, v: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """<phi_i|H|phi_i> / <phi_i|phi_i> for column-stored orbitals."""
    diag, up, lo = hamiltonian_terms(v, grid)
    hpsi = _cn.apply_hamiltonian(psi, diag, up, lo, np.empty_like(psi))
    num = np.einsum("ji,ji->i", psi.conj(), hpsi).real
    den = np.einsum("ji,ji->i", psi.conj(), psi).real
    return num / den


def residual_norms(orbitals: np.ndarray, v: np.ndarray, grid: SpatialGrid,
                   epsilons: np.ndarray) -> np.ndarray:
    """||(H - eps_i) phi_i|| for row-stored orbitals."""
    psi = np.ascontiguousarray(np.asarray(orbitals, dtype=complex).T)
    diag, up, lo = hamiltonian_terms(v, grid)
    hpsi = _cn.apply_hamiltonian(psi, diag, up, lo, np.empty_like(psi))
    r = hpsi - psi * epsilons[None, :]
    return np.sqrt((np.abs(r) ** 2).sum(axis=0) * grid.dx)


def initial_guess(lattice: IonicLattice, grid: SpatialGrid, n_orbitals: int) -> np.ndarray:
    """Particle-in-a-box sine modes on the cluster, column-stored and normalized."""
    half = lattice.extent + 2.0 * max(lattice.spacing, 1.0)
    x = grid.x
    inside = np.abs(x) < half
    m = np.arange(1, n_orbitals + 1)
    psi = np.where(inside[:, None], np.sin(np.pi * m[None, :] * (x[:, None] + half) / (2 * half)), 0.0)
    psi = psi.astype(complex)
    return _cn.gram_schmidt(psi, grid.dx)


def imaginary_time_step(psi: np.ndarray, v: np.ndarray, grid: SpatialGrid, dt: float) -> np.ndarray:
    diag, up, lo = hamiltonian_terms(v, grid)
    out = _cn.cayley_step(psi, diag, up, lo, 0.5 * dt, np.empty_like(psi))
    return _cn.gram_schmidt(out, grid.dx)


def solve_ground_state(lattice: IonicLattice, grid: SpatialGrid, n_orbitals: int = 20,
                       tol: float = 1e-12, dt: float = 0.25, mixing: float = 0.3,
                       max_iter: int = 100_000) -> GroundState:
    """Iterate imaginary-time steps with density mixing until max |d eps_i| < tol."""
    if n_orbitals < 1:
        raise ValueError("n_orbitals must be >= 1")
    v_ion = ionic_potential(lattice, grid)
    psi = initial_guess(lattice, grid, n_orbitals)
    n_mix = density(psi.T, grid)
    eps_old = None
    drift = np.inf
    for it in range(1, max_iter + 1):
        v = ks_potential(lattice, n_mix, grid, v_ion).total
        psi = imaginary_time_step(psi, v, grid, dt)
        n_new = density(psi.T, grid)
        n_mix = (1.0 - mixing) * n_mix + mixing * n_new
        eps = rayleigh_quotients(psi, ks_potential(lattice, n_new, grid, v_ion).total, grid)
        if eps_old is not None:
            drift = float(np.max(np.abs(eps - eps_old)))
            if drift < tol:
                break
        eps_old = eps
    else:
        raise ConvergenceError(
            f"ground state not converged after {max_iter} iterations (drift {drift:.3e})",
            drift, max_iter)
    log.info("ground state converged in %d iterations, drift %.2e", it, drift)

    orbitals = np.ascontiguousarray(psi.T)
    pot = ks_potential(lattice, n_new, grid, v_ion)
    order = np.argsort(eps)
    if np.any(order != np.arange(n_orbitals)):
        raise ConvergenceError("imaginary-time orbitals did not settle in ascending order", drift, it)
    if eps[-1] >= 0:
        raise ConvergenceError(f"only {np.sum(eps < 0)} bound states, {n_orbitals} requested",
                               drift, it)
    return GroundState(grid, lattice, orbitals, EnergyLevels(eps, n_orbitals), pot, it, drift)


def direct_eigenstates(v: np.ndarray, grid: SpatialGrid, count: int):
    """Lowest ``count`` eigenpairs of the discrete Hamiltonian by tridiagonal diagonalization."""
    diag, up, _ = hamiltonian_terms(v, grid)
    w, vec = eigh_tridiagonal(diag, np.full(grid.n_points - 1, up.real),
                              select="i", select_range=(0, count - 1))
    return w, (vec / np.sqrt(grid.dx)).T


def unoccupied_states(potential: KSPotential | np.ndarray, grid: SpatialGrid, first: int,
                      count: int, method: str = "imaginary", dt: float = 1.0,
                      tol: float = 1e-12, max_iter: int = 200_000):
    """Eigenpairs ``first .. first+count-1`` of a fixed Kohn-Sham Hamiltonian.

    Imaginary time runs all states up to the highest requested one, each kept
    orthogonal to the lower ones.  Returns ``(EnergyLevels, orbitals)``.
    """
    v = potential.total if isinstance(potential, KSPotential) else np.asarray(potential)
    if first < 1 or count < 1:
        raise ValueError("first and count must be >= 1")
    top = first + count - 1
    if method == "direct":
        eps, orbitals = direct_eigenstates(v, grid, top)
    elif method == "imaginary":
        j = np.arange(1, grid.n_points + 1)[:, None]
        m = np.arange(1, top + 1)[None, :]
        psi = _cn.gram_schmidt(np.sin(np.pi * m * j / (grid.n_points + 1)).astype(complex), grid.dx)
        eps_old = rayleigh_quotients(psi, v, grid)
        for it in range(max_iter):
            psi = imaginary_time_step(psi, v, grid, dt)
            eps = rayleigh_quotients(psi, v, grid)
            if np.max(np.abs(eps - eps_old)) < tol:
                break
            eps_old = eps
        else:
            raise ConvergenceError(f"unoccupied states not converged after {max_iter} steps")
        orbitals = np.ascontiguousarray(psi.T)
    else:
        raise ValueError(f"unknown method {method!r}")
    eps = np.asarray(eps)
    edge = min(v[0], v[-1])  # continuum threshold of the box
    if eps[-1] >= edge:
        bound = int(np.sum(eps < edge))
        raise ValueError(f"state {top} requested but the potential binds only {bound} states")
    sl = slice(first - 1, top)
    return EnergyLevels(eps[sl].copy(), 0, first), orbitals[sl].copy()
