"""Delta-kick linear response: dipole spectra, collectivity, mode currents."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import peak_positions
from .dynamics import (CurrentRecorder, DipoleRecorder, KickExcitation, LaserPulse,
                       PropagationConfig, run)
from .grid import AbsorberSpec
from .groundstate import GroundState


@dataclass
class DipoleRecord:
    times: np.ndarray
    orbital: np.ndarray  # (n_times, n_orbitals), d_i = int x 2|phi_i|^2
    metadata: dict = field(default_factory=dict)

    @property
    def total(self) -> np.ndarray:
        return self.orbital.sum(axis=1)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @classmethod
    def from_recorder(cls, rec: DipoleRecorder, metadata=None) -> "DipoleRecord":
        return cls(np.array(rec.times), np.array(rec.values), dict(metadata or {}))


@dataclass
class PowerSpectrum:
    """P(Omega) = Omega^4 |FFT[D](Omega)|^2 on a uniform Omega axis."""

    omega: np.ndarray
    power: np.ndarray
    taper: str
    record_length: float

    @property
    def resolution(self) -> float:
        return 2.0 * np.pi / self.record_length

    def band(self, lo: float, hi: float):
        sel = (self.omega >= lo) & (self.omega <= hi)
        return self.omega[sel], self.power[sel]


def kick_run(ground: GroundState, kick_strength: float = 1e-4, T_record: float = 2e4,
             frozen: bool = False, dt: float = 0.25,
             absorber: AbsorberSpec | None = AbsorberSpec()) -> DipoleRecord:
    """Propagate after a Theta-step A = -kick_strength and record every orbital dipole."""
    cfg = PropagationConfig(dt=dt, t_end=T_record, frozen=frozen, absorber=absorber)
    rec = DipoleRecorder()
    run(ground, KickExcitation(kick_strength), cfg, [rec])
    return DipoleRecord.from_recorder(rec, {"kick_strength": kick_strength, "frozen": frozen,
                                            "T_record": T_record, "dt": dt})


_TAPERS = {
    "hann": np.hanning,
    "hamming": np.hamming,
    "blackman": np.blackman,
    "none": np.ones,
}


def power_spectrum(signal, dt: float | None = None, taper: str = "hann", pad: int = 4,
                   resolution: float | None = None) -> PowerSpectrum:
    """Mean-removed, tapered, zero-padded FFT of a uniformly sampled signal, times Omega^4.

    ``signal`` is a :class:`DipoleRecord` (its total dipole is used) or a 1D
    array together with ``dt``.  If ``resolution`` is given, records shorter
    than ``2 pi / resolution`` are rejected.
    """
    if isinstance(signal, DipoleRecord):
        dt = signal.dt
        signal = signal.total
    if dt is None:
        raise ValueError("dt is required for a bare array")
    d = np.asarray(signal, dtype=float)
    n = len(d)
    length = n * dt
    if resolution is not None and 2 * np.pi / length > resolution:
        raise ValueError(f"record of length {length:g} resolves only {2 * np.pi / length:.2e}, "
                         f"{resolution:.2e} requested")
    try:
        win = _TAPERS[taper](n)
    except KeyError:
        raise ValueError(f"unknown taper {taper!r}") from None
    n_fft = pad * n
    f = np.fft.rfft((d - d.mean()) * win, n_fft) * dt
    omega = 2 * np.pi * np.fft.rfftfreq(n_fft, dt)
    return PowerSpectrum(omega, omega ** 4 * (f.real ** 2 + f.imag ** 2), taper, length)


def orbital_power_spectra(record: DipoleRecord, taper: str = "hann", pad: int = 4) -> list[PowerSpectrum]:
    return [power_spectrum(record.orbital[:, i], record.dt, taper, pad)
            for i in range(record.orbital.shape[1])]


@dataclass
class Mode:
    omega: float
    height: float
    fwhm: float
    shared: int
    collective: bool
    label: str = ""


@dataclass
class ModeCatalog:
    modes: list[Mode]
    n_orbitals: int
    tolerance: float

    @property
    def collective(self) -> list[Mode]:
        return [m for m in self.modes if m.collective]

    def as_dict(self) -> dict:
        return {
            "n_orbitals": self.n_orbitals,
            "tolerance": self.tolerance,
            "modes": [vars(m) for m in self.modes],
        }


def spectral_peaks(spec: PowerSpectrum, band=(0.005, 0.5), prominence_factor: float = 10.0):
    """Local maxima in ``band`` whose prominence exceeds ``prominence_factor`` x the median floor."""
    om, p = spec.band(*band)
    floor = float(np.median(p))
    if floor <= 0:
        floor = float(np.max(p)) * 1e-12
    if not np.any(p > 0):
        return []
    return peak_positions(om, p, prominence=prominence_factor * floor)


def orbital_has_line(peaks: list, omega: float, tol: float, min_relative_height: float = 1e-3) -> bool:
    """True if one of an orbital's ``peaks`` lies within ``tol`` of ``omega``
    and reaches ``min_relative_height`` of that orbital's tallest peak.

    The height floor keeps leakage and round-off ripples (1e-10 and below
    relative) from counting as participation.
    """
    if not peaks:
        return False
    floor = min_relative_height * max(q.height for q in peaks)
    return any(abs(q.position - omega) <= tol and q.height >= floor for q in peaks)


def classify_modes(total: PowerSpectrum, per_orbital: list[PowerSpectrum], band=(0.005, 0.5),
                   prominence_factor: float = 10.0, tolerance: float | None = None,
                   min_fraction: float = 0.9, min_relative_height: float = 1e-3) -> ModeCatalog:
    """Peaks of the total spectrum, labelled collective when shared by most orbitals.

    Sharing is decided by :func:`orbital_has_line` with ``tolerance``
    (default: the record resolution 2 pi / T) and ``min_relative_height``.
    Collective modes are lettered A, B, ... by increasing frequency.
    """
    tol = total.resolution if tolerance is None else tolerance
    peaks = spectral_peaks(total, band, prominence_factor)
    if not peaks:
        return ModeCatalog([], len(per_orbital), tol)
    top = max(p.height for p in peaks)
    peaks = [p for p in peaks if p.height >= min_relative_height * top]
    orb_peaks = [spectral_peaks(s, band, prominence_factor) for s in per_orbital]
    modes = []
    for p in sorted(peaks, key=lambda q: q.position):
        shared = sum(orbital_has_line(pk, p.position, tol, min_relative_height) for pk in orb_peaks)
        collective = len(per_orbital) > 0 and shared >= min_fraction * len(per_orbital)
        modes.append(Mode(p.position, p.height, p.fwhm, shared, collective))
    for i, m in enumerate(m for m in modes if m.collective):
        m.label = chr(ord("A") + i) if i < 26 else f"M{i + 1}"
    return ModeCatalog(modes, len(per_orbital), tol)


def peak_near(spec: PowerSpectrum, omega: float, tol: float, band=(0.005, 0.5),
              prominence_factor: float = 0.0):
    """Tallest detected peak within ``omega +- tol`` or None."""
    cands = [p for p in spectral_peaks(spec, band, prominence_factor)
             if abs(p.position - omega) <= tol]
    return max(cands, key=lambda p: p.height) if cands else None


@dataclass
class CurrentMap:
    times: np.ndarray
    x: np.ndarray
    j: np.ndarray  # (n_times, n_x)
    metadata: dict = field(default_factory=dict)


def mode_current_map(ground: GroundState, mode_freq: float, a0: float = 0.004, n_cyc: int = 20,
                     t_after: float = 1000.0, every: int = 4, x_range=(-40.0, 40.0),
                     dt: float = 0.25) -> CurrentMap:
    """Drive at a third of ``mode_freq`` and record j(x, t) once the pulse is over."""
    pulse = LaserPulse(a0, mode_freq / 3.0, n_cyc)
    cfg = PropagationConfig(dt=dt, t_end=pulse.duration + t_after)
    rec = CurrentRecorder(every=every, t_min=pulse.duration, x_range=x_range)
    run(ground, pulse, cfg, [rec])
    return CurrentMap(np.array(rec.times), rec.x(ground.grid), np.array(rec.values),
                      {"mode_freq": mode_freq, "omega_L": pulse.omega, "a0": a0, "n_cyc": n_cyc,
                       "t_pulse_end": pulse.duration})
