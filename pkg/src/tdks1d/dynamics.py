"""Real-time velocity-gauge Kohn-Sham propagation.

One step maps t -> t + dt with H = 1/2(-i d/dx + A)^2 + V_KS[n]:

1. predictor: Crank-Nicolson with V_KS[n(t)] gives a provisional n(t+dt);
2. corrector: Crank-Nicolson from t again with V_KS[(n(t) + n_prov)/2];
3. the uniform A^2/2 term as the exact phase exp(-i A^2 dt/2);
4. absorber damping exp(-W dt).

A is evaluated at the step midpoint.  In frozen mode the potential is held
at its ground-state value and a single Crank-Nicolson solve is done.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Protocol

import numpy as np

from . import _cn
from .grid import AbsorberSpec, SpatialGrid, current, density, orbital_dipoles
from .groundstate import GroundState, hamiltonian_terms
from .potentials import IonicLattice, ionic_potential, ks_potential

log = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """Non-finite values appeared during propagation."""


@dataclass(frozen=True)
class LaserPulse:
    """A(t) = a0 cos(w t) sin^2(w t / 2 n_cyc) on 0 < t < 2 pi n_cyc / w."""

    a0: float
    omega: float
    n_cyc: int = 20

    def __post_init__(self):
        if self.omega <= 0 or self.n_cyc < 1:
            raise ValueError("pulse needs omega > 0 and n_cyc >= 1")

    @property
    def duration(self) -> float:
        return 2.0 * math.pi * self.n_cyc / self.omega

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def vector_potential(self, t):
        t = np.asarray(t, dtype=float)
        a = self.a0 * np.cos(self.omega * t) * np.sin(self.omega * t / (2 * self.n_cyc)) ** 2
        return np.where((t > 0) & (t < self.duration), a, 0.0)

    def electric_field(self, t):
        """E(t) = -dA/dt."""
        t = np.asarray(t, dtype=float)
        w, nc = self.omega, self.n_cyc
        env = np.sin(w * t / (2 * nc))
        denv = (w / nc) * env * np.cos(w * t / (2 * nc))
        dA = self.a0 * (-w * np.sin(w * t) * env ** 2 + np.cos(w * t) * denv)
        return np.where((t > 0) & (t < self.duration), -dA, 0.0)

    def intensity(self) -> float:
        """Peak intensity proxy I = (a0 w)^2."""
        return (self.a0 * self.omega) ** 2


@dataclass(frozen=True)
class KickExcitation:
    """Theta-step in A: E(t) = strength * delta(t)."""

    strength: float = 1e-4
    duration = 0.0

    def vector_potential(self, t):
        return np.where(np.asarray(t, dtype=float) > 0, -self.strength, 0.0)


@dataclass(frozen=True)
class NoDrive:
    duration = 0.0

    def vector_potential(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class ConstantField:
    """Constant A for t > 0; used for gauge checks on free packets."""

    A: float
    duration = 0.0

    def vector_potential(self, t):
        return np.where(np.asarray(t, dtype=float) > 0, self.A, 0.0)


class Drive(Protocol):
    duration: float

    def vector_potential(self, t): ...


@dataclass
class DriveState:
    """Drive bookkeeping at time t: A(t), alpha(t) = int A, and int A^2/2."""

    t: float = 0.0
    A: float = 0.0
    alpha: float = 0.0
    quiver_phase: float = 0.0

    def advance(self, drive: Drive, dt: float) -> "DriveState":
        a_new = float(drive.vector_potential(self.t + dt))
        a_mid = float(drive.vector_potential(self.t + 0.5 * dt))
        return DriveState(self.t + dt, a_new,
                          self.alpha + 0.5 * dt * (self.A + a_new),
                          self.quiver_phase + 0.5 * dt * a_mid ** 2)


@dataclass(frozen=True)
class PropagationConfig:
    dt: float = 0.25
    t_end: float = 0.0
    frozen: bool = False
    absorber: AbsorberSpec | None = field(default_factory=AbsorberSpec)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def check_drive(self, drive: Drive) -> None:
        if self.t_end < drive.duration:
            raise ValueError(f"t_end={self.t_end} is shorter than the pulse ({drive.duration:.1f})")


Observer = Callable[["Propagator"], None]


def cn_step(orbitals: np.ndarray, v: np.ndarray, A: float, grid: SpatialGrid,
            dt: float) -> np.ndarray:
    """One plain Crank-Nicolson step for row-stored orbitals in a fixed potential."""
    psi = np.ascontiguousarray(np.atleast_2d(orbitals).T, dtype=complex)
    diag, up, lo = hamiltonian_terms(v, grid, A)
    out = _cn.cayley_step(psi, diag, up, lo, 0.5j * dt, np.empty_like(psi))
    out *= np.exp(-0.5j * A * A * dt)
    return np.ascontiguousarray(out.T)


def gaussian_packet(grid: SpatialGrid, x0: float, width: float, k0: float) -> np.ndarray:
    """exp(-(x-x0)^2 / 2 width^2 + i k0 x), unit norm on the grid."""
    psi = np.exp(-((grid.x - x0) ** 2) / (2 * width ** 2) + 1j * k0 * grid.x)
    return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)


@dataclass
class Checkpoint:
    """Restartable propagation state (see :mod:`tdks1d.io` for the file format)."""

    step: int
    orbitals: np.ndarray
    drive_state: DriveState
    samples: dict = field(default_factory=dict)


class Propagator:
    """Owns one evolving orbital set.

    Orbitals are held column-wise internally; :attr:`orbitals` is the
    ``(n_orbitals, n_points)`` view.
    """

    def __init__(self, grid: SpatialGrid, lattice: IonicLattice, orbitals: np.ndarray,
                 drive: Drive, config: PropagationConfig,
                 frozen_potential: np.ndarray | None = None):
        self.grid = grid
        self.lattice = lattice
        self.drive = drive
        self.config = config
        self.psi = np.ascontiguousarray(np.atleast_2d(orbitals).T, dtype=complex)
        self.step_index = 0
        self.drive_state = DriveState(0.0, float(drive.vector_potential(0.0)))
        self._v_ion = ionic_potential(lattice, grid)
        if config.frozen:
            if frozen_potential is None:
                frozen_potential = self.potential(self.density)
            self._v_frozen = np.asarray(frozen_potential, dtype=float)
        else:
            self._v_frozen = None
        absorber = config.absorber
        self._mask = None
        if absorber is not None and absorber.strength > 0:
            self._mask = absorber.mask(grid, config.dt)[:, None]

    @classmethod
    def from_ground_state(cls, ground: GroundState, drive: Drive, config: PropagationConfig):
        return cls(ground.grid, ground.lattice, ground.orbitals, drive, config,
                   ground.potential.total if config.frozen else None)

    @property
    def t(self) -> float:
        return self.drive_state.t

    @property
    def orbitals(self) -> np.ndarray:
        return self.psi.T

    @property
    def density(self) -> np.ndarray:
        return 2.0 * (self.psi.real ** 2 + self.psi.imag ** 2).sum(axis=1)

    def potential(self, n: np.ndarray) -> np.ndarray:
        return ks_potential(self.lattice, n, self.grid, self._v_ion).total

    def _cayley(self, psi, v, A):
        diag, up, lo = hamiltonian_terms(v, self.grid, A)
        return _cn.cayley_step(psi, diag, up, lo, 0.5j * self.config.dt, np.empty_like(psi))

    def step(self) -> None:
        dt = self.config.dt
        a_mid = float(self.drive.vector_potential(self.t + 0.5 * dt))
        if self._v_frozen is not None:
            new = self._cayley(self.psi, self._v_frozen, a_mid)
        else:
            n0 = self.density
            provisional = self._cayley(self.psi, self.potential(n0), a_mid)
            n_prov = 2.0 * (provisional.real ** 2 + provisional.imag ** 2).sum(axis=1)
            new = self._cayley(self.psi, self.potential(0.5 * (n0 + n_prov)), a_mid)
        if a_mid != 0.0:
            new *= np.exp(-0.5j * a_mid * a_mid * dt)
        if self._mask is not None:
            new *= self._mask
        if not np.isfinite(new).all():
            raise NumericalError(f"non-finite orbitals at step {self.step_index + 1} (t={self.t + dt})")
        self.psi = new
        self.drive_state = self.drive_state.advance(self.drive, dt)
        self.step_index += 1

    def run(self, observers: Iterable[Observer] = (), n_steps: int | None = None,
            observe_initial: bool = True,
            checkpoint_every: int | None = None,
            on_checkpoint: Callable[[Checkpoint], None] | None = None) -> None:
        """Advance ``n_steps`` (default: up to ``config.t_end``), calling observers after each step."""
        observers = list(observers)
        if n_steps is None:
            n_steps = self.config.n_steps - self.step_index
        if observe_initial:
            self._notify(observers)
        for _ in range(n_steps):
            self.step()
            self._notify(observers)
            if checkpoint_every and on_checkpoint and self.step_index % checkpoint_every == 0:
                on_checkpoint(self.checkpoint(observers))

    def _notify(self, observers):
        for obs in observers:
            try:
                obs(self)
            except Exception as exc:
                raise RuntimeError(
                    f"observer {type(obs).__name__} failed at step {self.step_index} (t={self.t})"
                ) from exc

    def checkpoint(self, observers: Iterable[Observer] = ()) -> Checkpoint:
        samples = {type(o).__name__: len(o) for o in observers if hasattr(o, "__len__")}
        return Checkpoint(self.step_index, self.orbitals.copy(), replace(self.drive_state), samples)

    def restore(self, ckpt: Checkpoint) -> None:
        self.psi = np.ascontiguousarray(np.asarray(ckpt.orbitals).T, dtype=complex)
        self.step_index = ckpt.step
        self.drive_state = replace(ckpt.drive_state)


class DipoleRecorder:
    """Per-orbital dipoles d_i(t); the total is their sum."""

    def __init__(self, every: int = 1):
        self.every = every
        self.times: list[float] = []
        self.values: list[np.ndarray] = []

    def __call__(self, prop: Propagator) -> None:
        if prop.step_index % self.every:
            return
        self.times.append(prop.t)
        self.values.append(orbital_dipoles(prop.orbitals, prop.grid))

    def __len__(self):
        return len(self.times)


class NormMonitor:
    def __init__(self, every: int = 1):
        self.every = every
        self.times: list[float] = []
        self.norms: list[np.ndarray] = []

    def __call__(self, prop: Propagator) -> None:
        if prop.step_index % self.every:
            return
        psi = prop.psi
        self.times.append(prop.t)
        self.norms.append((psi.real ** 2 + psi.imag ** 2).sum(axis=0) * prop.grid.dx)

    def __len__(self):
        return len(self.times)


class CurrentRecorder:
    """j(x, t) on a sub-range of the grid, from ``t_min`` on."""

    def __init__(self, every: int = 1, t_min: float = 0.0, x_range: tuple[float, float] | None = None):
        self.every = every
        self.t_min = t_min
        self.x_range = x_range
        self.times: list[float] = []
        self.values: list[np.ndarray] = []
        self._sl = None

    def __call__(self, prop: Propagator) -> None:
        if prop.step_index % self.every or prop.t < self.t_min:
            return
        if self._sl is None:
            if self.x_range is None:
                self._sl = slice(None)
            else:
                self._sl = slice(prop.grid.index_of(self.x_range[0]),
                                 prop.grid.index_of(self.x_range[1]) + 1)
        self.times.append(prop.t)
        self.values.append(current(prop.orbitals, prop.drive_state.A, prop.grid)[self._sl])

    def x(self, grid: SpatialGrid) -> np.ndarray:
        return grid.x[self._sl if self._sl is not None else slice(None)]

    def __len__(self):
        return len(self.times)


class SnapshotRecorder:
    """Density snapshots every ``every`` steps."""

    def __init__(self, every: int = 100):
        self.every = every
        self.times: list[float] = []
        self.densities: list[np.ndarray] = []

    def __call__(self, prop: Propagator) -> None:
        if prop.step_index % self.every:
            return
        self.times.append(prop.t)
        self.densities.append(prop.density)

    def __len__(self):
        return len(self.times)


def run(ground: GroundState, drive: Drive, config: PropagationConfig,
        observers: Iterable[Observer] = ()) -> Propagator:
    """Propagate the ground state under ``drive`` up to ``config.t_end``."""
    config.check_drive(drive)
    prop = Propagator.from_ground_state(ground, drive, config)
    prop.run(observers)
    return prop
