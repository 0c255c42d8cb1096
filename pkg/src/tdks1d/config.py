"""Run configuration: flat ``section.key = value`` text.

Lines starting with ``#`` are comments.  Every key has a typed default in
:data:`DEFAULTS`; unknown keys and unparsable values raise
:class:`ConfigError` naming the offending key.  Comma-separated values give
tuples.  All quantities are Hartree atomic units.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .dynamics import KickExcitation, LaserPulse, NoDrive, PropagationConfig
from .grid import AbsorberSpec, SpatialGrid
from .potentials import IonicLattice
from .tsurff import MomentumGrid, SurfacePair


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


DEFAULTS: dict[str, Any] = {
    "grid.n_points": 2000,
    "grid.dx": 0.5,
    "lattice.n_ions": 40,
    "lattice.spacing": 1.125,
    "lattice.softening": 1.0,
    "ground.n_orbitals": 20,
    "ground.tol": 1e-12,
    "ground.dt": 0.25,
    "ground.mixing": 0.3,
    "ground.max_iter": 100000,
    "ground.n_unoccupied": 3,
    "ground.unoccupied_method": "direct",
    "ground.external": "",  # "harmonic" replaces the ion chain by V = x^2/2
    "drive.kind": "pulse",
    "drive.a0": 0.004,
    "drive.omega": 0.052,
    "drive.n_cyc": 20,
    "drive.kick_strength": 1e-4,
    "packet.k0": 0.8,
    "packet.width": 5.0,
    "packet.x0": 0.0,
    "propagation.dt": 0.25,
    "propagation.post_pulse": 3000.0,
    "propagation.t_end": 0.0,  # 0: pulse duration + post_pulse
    "propagation.frozen": False,
    "propagation.checkpoint_every": 0,
    "absorber.enabled": True,
    "absorber.width_fraction": 0.15,
    "absorber.strength": 0.2,
    "absorber.order": 4,
    "surfaces.fraction": 0.25,
    "kgrid.k_max": 1.0,
    "kgrid.dk": 1e-3,
    "kick.T_record": 20000.0,
    "kick.mode": "both",
    "kick.taper": "hann",
    "kick.pad": 4,
    "spectrum.orbitals": (18, 19, 20),
    "gabor.sigma": 0.0,  # 0: one laser period
    "gabor.spacing": 0.0,  # 0: half a laser period
    "gabor.k_max": 0.9,
    "gabor.dk": 2e-3,
    "scan.a0": (0.004, 0.005, 0.006),
    "scan.ati_level": 20,
    "scan.ati_order": 0,  # 0: lowest open channel of ati_level
    "scan.ati_halfwidth": 0.0,  # 0: omega_L / 4
    "scan.plasmon_level": 19,
    "scan.plasmon_omega": 0.156,
    "scan.plasmon_order": 2,
    "scan.plasmon_halfwidth": 0.0,  # 0: plasmon_omega / 10
    "scan.jobs": 1,
    "analysis.omega_A": 0.106,
    "analysis.omega_B": 0.156,
    "analysis.prominence": 1.0,
    "analysis.E_max": 0.4,
    "output.dir": "tdks1d-output",
}

_CHOICES = {
    "drive.kind": ("pulse", "kick", "none", "packet"),
    "kick.mode": ("unfrozen", "frozen", "both"),
    "kick.taper": ("hann", "hamming", "blackman", "none"),
    "ground.unoccupied_method": ("direct", "imaginary"),
    "ground.external": ("", "harmonic"),
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(key: str, raw: str) -> Any:
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            return _parse_bool(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            kind = type(default[0])
            return tuple(kind(v) for v in raw.split(",") if v.strip())
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r} as {type(default).__name__}") from exc


@dataclass(frozen=True)
class RunConfig:
    values: Mapping[str, Any] = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    # construction -----------------------------------------------------
    @classmethod
    def from_text(cls, text: str, overrides: Mapping[str, str] | None = None) -> "RunConfig":
        vals = dict(DEFAULTS)
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(key or f"line {lineno}", "expected 'key = value'")
            if key not in DEFAULTS:
                raise ConfigError(key, "unknown configuration key")
            vals[key] = _coerce(key, raw)
        for key, raw in (overrides or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(key, "unknown configuration key")
            vals[key] = _coerce(key, raw)
        cfg = cls(vals)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides=None) -> "RunConfig":
        return cls.from_text(Path(path).read_text(), overrides)

    def replace(self, **changes) -> "RunConfig":
        """Copy with dotted keys given as ``section__key=value``."""
        vals = dict(self.values)
        for k, v in changes.items():
            key = k.replace("__", ".")
            if key not in DEFAULTS:
                raise ConfigError(key, "unknown configuration key")
            vals[key] = v
        cfg = RunConfig(vals)
        cfg.validate()
        return cfg

    def to_text(self) -> str:
        lines = []
        for key in sorted(self.values):
            v = self.values[key]
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def validate(self) -> None:
        v = self.values
        for key, choices in _CHOICES.items():
            if v[key] not in choices:
                raise ConfigError(key, f"must be one of {choices}, got {v[key]!r}")
        checks = [
            ("grid.n_points", v["grid.n_points"] >= 4 and v["grid.n_points"] % 2 == 0,
             "must be an even integer >= 4"),
            ("grid.dx", v["grid.dx"] > 0, "must be positive"),
            ("lattice.n_ions", v["lattice.n_ions"] >= 1, "must be >= 1"),
            ("lattice.softening", v["lattice.softening"] > 0, "must be positive"),
            ("ground.n_orbitals", v["ground.n_orbitals"] >= 1, "must be >= 1"),
            ("ground.tol", v["ground.tol"] > 0, "must be positive"),
            ("ground.mixing", 0 < v["ground.mixing"] <= 1, "must lie in (0, 1]"),
            ("drive.omega", v["drive.omega"] > 0, "must be positive"),
            ("drive.n_cyc", v["drive.n_cyc"] >= 1, "must be >= 1"),
            ("propagation.dt", v["propagation.dt"] > 0, "must be positive"),
            ("propagation.post_pulse", v["propagation.post_pulse"] >= 0, "must be >= 0"),
            ("propagation.t_end", v["propagation.t_end"] >= 0, "must be >= 0"),
            ("absorber.width_fraction", 0 < v["absorber.width_fraction"] < 0.5,
             "must lie in (0, 0.5)"),
            ("absorber.strength", v["absorber.strength"] >= 0, "must be >= 0"),
            ("surfaces.fraction", 0 < v["surfaces.fraction"] < 0.5, "must lie in (0, 0.5)"),
            ("kgrid.dk", v["kgrid.dk"] > 0, "must be positive"),
            ("kgrid.k_max", v["kgrid.k_max"] > 0, "must be positive"),
            ("kick.T_record", v["kick.T_record"] > 0, "must be positive"),
            ("packet.width", v["packet.width"] > 0, "must be positive"),
            ("kick.pad", v["kick.pad"] >= 1, "must be >= 1"),
            ("scan.jobs", v["scan.jobs"] >= 1, "must be >= 1"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(key, f"{msg}, got {v[key]!r}")
        if v["drive.kind"] == "packet" and v["propagation.t_end"] <= 0:
            raise ConfigError("propagation.t_end", "a packet run needs an explicit t_end")
        if v["drive.kind"] == "pulse" and 0 < v["propagation.t_end"] < self.pulse().duration:
            raise ConfigError("propagation.t_end",
                              f"{v['propagation.t_end']} is shorter than the pulse "
                              f"({self.pulse().duration:.1f})")
        if v["absorber.enabled"]:
            try:
                self.absorber().check_surfaces(self.grid(), *self.surfaces().positions)
            except ValueError as exc:
                raise ConfigError("surfaces.fraction", str(exc)) from None

    # builders ---------------------------------------------------------
    def grid(self) -> SpatialGrid:
        return SpatialGrid(self["grid.n_points"], self["grid.dx"])

    def lattice(self) -> IonicLattice:
        return IonicLattice(self["lattice.n_ions"], self["lattice.spacing"], self["lattice.softening"])

    def absorber(self) -> AbsorberSpec | None:
        if not self["absorber.enabled"]:
            return None
        return AbsorberSpec(self["absorber.width_fraction"], self["absorber.strength"],
                            self["absorber.order"])

    def surfaces(self) -> SurfacePair:
        return SurfacePair.default(self.grid(), self["surfaces.fraction"])

    def kgrid(self) -> MomentumGrid:
        return MomentumGrid(self["kgrid.k_max"], self["kgrid.dk"])

    def pulse(self, a0: float | None = None) -> LaserPulse:
        return LaserPulse(self["drive.a0"] if a0 is None else a0, self["drive.omega"],
                          self["drive.n_cyc"])

    def drive(self, a0: float | None = None):
        kind = self["drive.kind"]
        if kind == "pulse":
            return self.pulse(a0)
        if kind == "kick":
            return KickExcitation(self["drive.kick_strength"])
        return NoDrive()

    def t_end(self, drive=None) -> float:
        if self["propagation.t_end"] > 0:
            return self["propagation.t_end"]
        drive = self.drive() if drive is None else drive
        return drive.duration + self["propagation.post_pulse"]

    def propagation(self, drive=None, frozen: bool | None = None) -> PropagationConfig:
        return PropagationConfig(
            dt=self["propagation.dt"], t_end=self.t_end(drive),
            frozen=self["propagation.frozen"] if frozen is None else frozen,
            absorber=self.absorber())

    def gabor_sigma(self) -> float:
        s = self["gabor.sigma"]
        return s if s > 0 else 2 * math.pi / self["drive.omega"]

    def gabor_spacing(self) -> float:
        s = self["gabor.spacing"]
        return s if s > 0 else math.pi / self["drive.omega"]

    def as_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.values.items())}
