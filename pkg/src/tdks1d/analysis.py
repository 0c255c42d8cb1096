"""Peak ladders, energy-window yields and intensity-scaling fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_widths


@dataclass
class Peak:
    position: float
    height: float
    fwhm: float
    prominence: float = 0.0


def peak_positions(x, y, prominence: float = 0.0, scale: str = "linear",
                   x_range: tuple[float, float] | None = None) -> list[Peak]:
    """Local maxima of ``y(x)`` with at least ``prominence``.

    With ``scale="log"`` the prominence is measured on ln(y), i.e. in
    e-folds, which suits spectra spanning many decades.  Positions get a
    parabolic sub-bin refinement; FWHM comes from linear interpolation of
    the half-height crossings on the linear scale.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x_range is not None:
        sel = (x >= x_range[0]) & (x <= x_range[1])
        x, y = x[sel], y[sel]
    if len(y) < 3:
        return []
    if scale == "log":
        work = np.log(np.clip(y, np.finfo(float).tiny, None))
    elif scale == "linear":
        work = y
    else:
        raise ValueError(f"unknown scale {scale!r}")
    idx, props = find_peaks(work, prominence=prominence)
    if len(idx) == 0:
        return []
    widths = peak_widths(y, idx, rel_height=0.5)[0]
    out = []
    for j, w, prom in zip(idx, widths, props["prominences"]):
        pos = x[j]
        if 0 < j < len(y) - 1:
            y0, y1, y2 = work[j - 1], work[j], work[j + 1]
            den = y0 - 2 * y1 + y2
            if den < 0:
                shift = 0.5 * (y0 - y2) / den
                pos = x[j] + shift * 0.5 * (x[j + 1] - x[j - 1])
        spacing = np.interp(j, np.arange(len(x) - 1) + 0.5, np.diff(x))
        out.append(Peak(float(pos), float(y[j]), float(w * spacing), float(prom)))
    return out


@dataclass
class PeakLadder:
    """E_n = epsilon + n * omega for every order n that gives E_n > 0."""

    orbital: int
    epsilon: float
    omega: float
    orders: np.ndarray
    energies: np.ndarray


def predicted_peaks(epsilons, omega: float, E_max: float, orbitals=None) -> list[PeakLadder]:
    """One PeakLadder per orbital label (1-based); defaults to every occupied level.

    ``epsilons`` is an :class:`~tdks1d.groundstate.EnergyLevels` or a plain
    array whose entry ``i`` is level ``i + 1``.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    if hasattr(epsilons, "epsilons"):
        levels = epsilons
        if orbitals is None:
            orbitals = range(levels.first, levels.first + (levels.n_occupied or len(levels.epsilons)))
        get = levels.__getitem__
    else:
        arr = np.asarray(epsilons, dtype=float)
        if orbitals is None:
            orbitals = range(1, len(arr) + 1)
        get = lambda i: float(arr[i - 1])  # noqa: E731
    ladders = []
    for i in orbitals:
        eps = get(i)
        n0 = math.ceil(-eps / omega) if eps < 0 else 0
        if eps + n0 * omega <= 0:
            n0 += 1
        orders = []
        n = n0
        while eps + n * omega <= E_max:
            orders.append(n)
            n += 1
        orders = np.array(orders, dtype=int)
        ladders.append(PeakLadder(int(i), eps, omega, orders, eps + omega * orders))
    return ladders


@dataclass(frozen=True)
class EnergyWindow:
    lo: float
    hi: float
    role: str = "ATI"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty energy window [{self.lo}, {self.hi}]")

    @classmethod
    def around(cls, center: float, half_width: float, role: str = "ATI") -> "EnergyWindow":
        return cls(center - half_width, center + half_width, role)

    def widened(self, factor: float) -> "EnergyWindow":
        c, h = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo) * factor
        return EnergyWindow(c - h, c + h, self.role)

    def contains(self, E) -> np.ndarray:
        E = np.asarray(E)
        return (E >= self.lo) & (E <= self.hi)


def window_yield(spectrum, window: EnergyWindow) -> float:
    """Trapezoid integral of Y(E) over the window (edges linearly interpolated).

    ``spectrum`` is a :class:`~tdks1d.tsurff.SpectrumSeries` or an ``(E, Y)`` pair.
    """
    if hasattr(spectrum, "energy"):
        E, Y, _ = spectrum.energy()
    else:
        E, Y = (np.asarray(a, dtype=float) for a in spectrum)
    if window.lo < E[0] or window.hi > E[-1]:
        raise ValueError(f"window [{window.lo}, {window.hi}] exceeds spectrum domain "
                         f"[{E[0]}, {E[-1]}]")
    inside = window.contains(E)
    xs = np.concatenate([[window.lo], E[inside], [window.hi]])
    ys = np.concatenate([[np.interp(window.lo, E, Y)], Y[inside], [np.interp(window.hi, E, Y)]])
    return float(np.trapezoid(ys, xs))


@dataclass
class ScalingFit:
    a0: np.ndarray
    intensity: np.ndarray
    yields: np.ndarray
    exponent: float
    intercept: float
    residual: float
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "a0": self.a0.tolist(),
            "intensity": self.intensity.tolist(),
            "yield": self.yields.tolist(),
            "exponent": self.exponent,
            "intercept": self.intercept,
            "residual": self.residual,
            **self.metadata,
        }


def scaling_exponent(yields, omega_L: float) -> ScalingFit:
    """Least-squares slope of ln Y against ln I with I = (a0 omega_L)^2."""
    pts = np.asarray(yields, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least three (a0, yield) pairs")
    a0, y = pts[:, 0], pts[:, 1]
    if np.any(y <= 0) or np.any(a0 <= 0):
        raise ValueError("yields and amplitudes must be positive")
    intensity = (a0 * omega_L) ** 2
    coef, res, *_ = np.polyfit(np.log(intensity), np.log(y), 1, full=True)
    residual = float(np.sqrt(res[0] / len(y))) if len(res) else 0.0
    return ScalingFit(a0, intensity, y, float(coef[0]), float(coef[1]), residual)


def comb_spacing(positions, guess: float | None = None) -> tuple[float, float]:
    """Fitted spacing and rms deviation of peaks on one equally spaced ladder.

    Without ``guess`` the peaks are taken as consecutive rungs; with it, each
    peak's order is ``round((p - p_min) / guess)`` so missing rungs are allowed.
    """
    p = np.sort(np.asarray(positions, dtype=float))
    if len(p) < 2:
        raise ValueError("need at least two peaks")
    n = np.arange(len(p)) if guess is None else np.round((p - p[0]) / guess)
    if len(np.unique(n)) < 2:
        raise ValueError("peaks collapse onto a single rung")
    coef = np.polyfit(n, p, 1)
    return float(coef[0]), float(np.sqrt(np.mean((np.polyval(coef, n) - p) ** 2)))


def match_ladder(peaks, ladders: list[PeakLadder], tol: float):
    """Pair each peak position with the nearest ladder rung within ``tol``.

    Returns a list of ``(position, orbital, order)``; unmatched peaks are dropped.
    """
    out = []
    for p in peaks:
        pos = p.position if isinstance(p, Peak) else float(p)
        best = None
        for lad in ladders:
            if len(lad.energies) == 0:
                continue
            j = int(np.argmin(np.abs(lad.energies - pos)))
            d = abs(lad.energies[j] - pos)
            if d <= tol and (best is None or d < best[0]):
                best = (d, lad.orbital, int(lad.orders[j]))
        if best is not None:
            out.append((pos, best[1], best[2]))
    return out
