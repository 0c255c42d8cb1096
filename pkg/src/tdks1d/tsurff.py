"""Time-dependent surface flux (t-SURFF) photoelectron spectra.

Orbital values and slopes are recorded at two fixed surfaces during the
propagation and projected afterwards onto velocity-gauge Volkov waves:

    b_R,i(k) = (2 pi)^-1/2  sum_t w(t) dt_trapz e^{i k^2 t/2} e^{-i k (x_R - alpha(t))}
               [(k/2 + A(t)) phi_i(x_R, t) - (i/2) phi_i'(x_R, t)]

and the same with x_L and an overall minus sign for b_L.  The propagator
applies the uniform A^2/2 term as a global phase exp(-i int A^2/2); the
record carries that phase so it can be removed again here, which leaves the
projection exactly in the form above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import SpatialGrid

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SurfacePair:
    grid: SpatialGrid
    x_left: float
    x_right: float

    def __post_init__(self):
        if not self.x_left < self.x_right:
            raise ValueError("left surface must lie left of the right surface")
        for j in (self.index_left, self.index_right):
            if not 1 <= j <= self.grid.n_points - 2:
                raise ValueError("surfaces need interior neighbours for the slope")

    @classmethod
    def default(cls, grid: SpatialGrid, fraction: float = 0.25) -> "SurfacePair":
        """Surfaces at ``fraction`` and ``1 - fraction`` of the box, measured from its left end."""
        x0 = -grid.half_width
        return cls(grid, x0 + fraction * grid.length, x0 + (1.0 - fraction) * grid.length)

    @property
    def index_left(self) -> int:
        return self.grid.index_of(self.x_left)

    @property
    def index_right(self) -> int:
        return self.grid.index_of(self.x_right)

    @property
    def positions(self) -> tuple[float, float]:
        """Node positions actually sampled."""
        x = self.grid.x
        return float(x[self.index_left]), float(x[self.index_right])


@dataclass
class SurfaceRecord:
    """Time series at both surfaces; orbital arrays are ``(n_times, n_orbitals)``."""

    dt: float
    x_left: float
    x_right: float
    t: np.ndarray
    A: np.ndarray
    alpha: np.ndarray
    quiver_phase: np.ndarray
    phi_left: np.ndarray
    dphi_left: np.ndarray
    phi_right: np.ndarray
    dphi_right: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_orbitals(self) -> int:
        return self.phi_left.shape[1]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def scaled(self, c: complex) -> "SurfaceRecord":
        return SurfaceRecord(self.dt, self.x_left, self.x_right, self.t, self.A, self.alpha,
                             self.quiver_phase, c * self.phi_left, c * self.dphi_left,
                             c * self.phi_right, c * self.dphi_right, dict(self.metadata))

    def select(self, orbitals) -> "SurfaceRecord":
        idx = np.asarray(orbitals)
        return SurfaceRecord(self.dt, self.x_left, self.x_right, self.t, self.A, self.alpha,
                             self.quiver_phase, self.phi_left[:, idx], self.dphi_left[:, idx],
                             self.phi_right[:, idx], self.dphi_right[:, idx], dict(self.metadata))

    def truncated(self, t_max: float) -> "SurfaceRecord":
        """Samples with t <= t_max: what a run stopped at t_max would have recorded."""
        n = int(np.searchsorted(self.t, t_max + 1e-9 * self.dt, side="right"))
        if n < 2:
            raise ValueError(f"t_max={t_max} keeps fewer than two samples")
        return SurfaceRecord(self.dt, self.x_left, self.x_right, self.t[:n], self.A[:n],
                             self.alpha[:n], self.quiver_phase[:n], self.phi_left[:n],
                             self.dphi_left[:n], self.phi_right[:n], self.dphi_right[:n],
                             {**self.metadata, "tau": float(self.t[n - 1])})


class SurfaceRecorder:
    """Propagation observer sampling phi and dphi/dx at both surfaces."""

    def __init__(self, surfaces: SurfacePair, every: int = 1):
        self.surfaces = surfaces
        self.every = every
        self._rows: list[tuple] = []

    def __call__(self, prop) -> None:
        if prop.step_index % self.every:
            return
        psi = prop.psi
        dx = prop.grid.dx
        jl, jr = self.surfaces.index_left, self.surfaces.index_right
        ds = prop.drive_state
        self._rows.append((
            ds.t, ds.A, ds.alpha, ds.quiver_phase,
            psi[jl].copy(), (psi[jl + 1] - psi[jl - 1]) / (2 * dx),
            psi[jr].copy(), (psi[jr + 1] - psi[jr - 1]) / (2 * dx),
        ))

    def __len__(self):
        return len(self._rows)

    def extend(self, record: SurfaceRecord) -> None:
        """Preload samples from an earlier record, e.g. when resuming from a checkpoint."""
        for n in range(len(record.t)):
            self._rows.append((record.t[n], record.A[n], record.alpha[n], record.quiver_phase[n],
                               record.phi_left[n], record.dphi_left[n],
                               record.phi_right[n], record.dphi_right[n]))

    def record(self, dt: float, metadata: dict | None = None) -> SurfaceRecord:
        cols = list(zip(*self._rows))
        scal = [np.array(c, dtype=float) for c in cols[:4]]
        orb = [np.array(c, dtype=complex) for c in cols[4:]]
        xl, xr = self.surfaces.positions
        return SurfaceRecord(dt * self.every, xl, xr, *scal, *orb, metadata=dict(metadata or {}))


@dataclass(frozen=True)
class MomentumGrid:
    """Symmetric uniform k grid ``dk * (-m..m)``."""

    k_max: float = 2.0
    dk: float = 1e-3

    def __post_init__(self):
        if not (self.k_max > 0 and self.dk > 0):
            raise ValueError("k_max and dk must be positive")

    @property
    def k(self) -> np.ndarray:
        m = int(round(self.k_max / self.dk))
        return self.dk * np.arange(-m, m + 1)


@dataclass(frozen=True)
class TimeWindow:
    center: float
    sigma: float

    def __call__(self, t):
        return np.exp(-((np.asarray(t) - self.center) ** 2) / (2.0 * self.sigma ** 2))


@dataclass
class AmplitudeLedger:
    k: np.ndarray
    b_left: np.ndarray   # (n_orbitals, n_k)
    b_right: np.ndarray


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    if len(t) > 1:
        d = np.diff(t)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
    return w


def accumulate(record: SurfaceRecord, kgrid: MomentumGrid | np.ndarray,
               window: TimeWindow | None = None, chunk: int = 512,
               window_cutoff: float = 8.0) -> AmplitudeLedger:
    """t-SURFF amplitudes for every orbital on ``kgrid``.

    With a window, samples beyond ``window_cutoff`` standard deviations from
    its center (weight below e^-32) are skipped.
    """
    k = kgrid.k if isinstance(kgrid, MomentumGrid) else np.asarray(kgrid, dtype=float)
    t = np.asarray(record.t, dtype=float)
    n_t = len(t)
    for name in ("A", "alpha", "quiver_phase", "phi_left", "dphi_left", "phi_right", "dphi_right"):
        if len(getattr(record, name)) != n_t:
            raise ValueError(f"record field {name} has {len(getattr(record, name))} samples, t has {n_t}")
    if n_t < 2:
        raise ValueError("record needs at least two samples")
    w = _trapezoid_weights(t)
    sel = np.arange(n_t)
    if window is not None:
        w = w * window(t)
        sel = np.nonzero(np.abs(t - window.center) <= window_cutoff * window.sigma)[0]

    n_orb = record.n_orbitals
    acc = {s: [np.zeros((len(k), n_orb), complex), np.zeros((len(k), n_orb), complex)]
           for s in ("left", "right")}
    for start in range(0, len(sel), chunk):
        idx = sel[start:start + chunk]
        tt, ww = t[idx], w[idx]
        # Volkov phase, including removal of the propagator's global A^2/2 phase
        phase = np.exp(1j * (0.5 * np.outer(k * k, tt) + np.outer(k, record.alpha[idx])
                             + record.quiver_phase[idx][None, :]))
        a = record.A[idx][:, None]
        for s in ("left", "right"):
            phi = getattr(record, f"phi_{s}")[idx]
            dphi = getattr(record, f"dphi_{s}")[idx]
            acc[s][0] += phase @ (ww[:, None] * phi)
            acc[s][1] += phase @ (ww[:, None] * (a * phi - 0.5j * dphi))
    out = {}
    for s, x_s, sign in (("left", record.x_left, -1.0), ("right", record.x_right, 1.0)):
        s0, s1 = acc[s]
        b = sign * _INV_SQRT_2PI * np.exp(-1j * k * x_s)[:, None] * (0.5 * k[:, None] * s0 + s1)
        out[s] = np.ascontiguousarray(b.T)
    return AmplitudeLedger(k, out["left"], out["right"])


@dataclass
class SpectrumSeries:
    """Y_i(k) = |b_R,i + b_L,i|^2 on a signed k axis."""

    k: np.ndarray
    per_orbital: np.ndarray  # (n_orbitals, n_k)
    metadata: dict = field(default_factory=dict)

    @property
    def total(self) -> np.ndarray:
        return self.per_orbital.sum(axis=0)

    def _fold(self, y: np.ndarray):
        k = self.k
        m = len(k) // 2
        if not np.allclose(k[m:], -k[m::-1]):
            raise ValueError("energy folding needs a symmetric k grid")
        pos = y[..., m:].copy()
        pos[..., 1:] += y[..., m - 1::-1]
        return 0.5 * k[m:] ** 2, pos

    def energy(self):
        """(E, Y_total(E), Y_i(E)) with both emission directions summed, E = k^2/2."""
        E, per = self._fold(self.per_orbital)
        return E, per.sum(axis=0), per


def spectrum(ledger: AmplitudeLedger, metadata: dict | None = None) -> SpectrumSeries:
    b = ledger.b_left + ledger.b_right
    return SpectrumSeries(ledger.k, b.real ** 2 + b.imag ** 2, dict(metadata or {}))


def packet_momentum_density(k, width: float, k0: float) -> np.ndarray:
    """|phi~(k)|^2 for the packet above, normalized to unit integral over k."""
    return width / np.sqrt(np.pi) * np.exp(-((np.asarray(k) - k0) ** 2) * width ** 2)


@dataclass
class WindowedSpectrum:
    centers: np.ndarray
    sigma: float
    energy: np.ndarray
    yields: np.ndarray  # (n_centers, n_E), all orbitals summed


def windowed_spectrum(record: SurfaceRecord, kgrid: MomentumGrid, centers, sigma: float,
                      ) -> WindowedSpectrum:
    centers = np.asarray(centers, dtype=float)
    lo, hi = float(record.t[0]), float(record.t[-1])
    if np.any(centers < lo) or np.any(centers > hi):
        raise ValueError(f"window centers must lie within [{lo}, {hi}]")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rows = []
    E = None
    for tc in centers:
        spec = spectrum(accumulate(record, kgrid, TimeWindow(float(tc), sigma)))
        E, y, _ = spec.energy()
        rows.append(y)
    return WindowedSpectrum(centers, sigma, E, np.array(rows))
