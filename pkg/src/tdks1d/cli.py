"""Command-line entry point: ``tdks1d {ground,kick,spectrum,gabor,scan,analyze}``.

Each subcommand reads a flat config file (``--config``), applies ``--set
key=value`` overrides, and writes plot-ready files into the output
directory: ``--out`` if given, else ``$TDKS1D_OUTPUT_ROOT/<output.dir>``
(the root defaults to the working directory).

Exit codes: 0 success, 2 invalid config or input, 3 ground state not
converged, 4 non-finite numbers during propagation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .analysis import (EnergyWindow, match_ladder, peak_positions, predicted_peaks,
                       scaling_exponent, window_yield)
from .config import ConfigError, RunConfig
from .dynamics import NoDrive, NumericalError, PropagationConfig, Propagator, gaussian_packet
from .grid import SpatialGrid
from .groundstate import (ConvergenceError, EnergyLevels, GroundState, solve_ground_state,
                          unoccupied_states)
from .linresp import (classify_modes, kick_run, orbital_power_spectra, power_spectrum)
from .tsurff import (MomentumGrid, SurfaceRecorder, accumulate, packet_momentum_density, spectrum,
                     windowed_spectrum)

log = logging.getLogger("tdks1d")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_NUMERIC = 0, 2, 3, 4
OUTPUT_ROOT_ENV = "TDKS1D_OUTPUT_ROOT"


def output_dir(cfg: RunConfig, override: str | None = None) -> Path:
    if override:
        out = Path(override)
    else:
        out = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / cfg["output.dir"]
    out.mkdir(parents=True, exist_ok=True)
    return out


def file_meta(cfg: RunConfig, units: str, **extra) -> dict:
    meta = {"config_hash": cfg.hash, "units": units}
    meta.update({k: v for k, v in extra.items()})
    meta["config"] = json.dumps(cfg.as_dict(), sort_keys=True)
    return meta


# ground -----------------------------------------------------------------

def ground_state(cfg: RunConfig) -> GroundState:
    return solve_ground_state(cfg.lattice(), cfg.grid(), cfg["ground.n_orbitals"],
                              tol=cfg["ground.tol"], dt=cfg["ground.dt"],
                              mixing=cfg["ground.mixing"], max_iter=cfg["ground.max_iter"])


def cmd_ground(cfg: RunConfig, out: Path):
    grid = cfg.grid()
    n_occ = cfg["ground.n_orbitals"]
    if cfg["ground.external"] == "harmonic":
        v = 0.5 * grid.x ** 2
        levels, orbitals = unoccupied_states(v, grid, 1, n_occ, cfg["ground.unoccupied_method"])
        rows = {"label": levels.labels, "epsilon": levels.epsilons,
                "occupied": np.ones(n_occ, dtype=int)}
        io.write_csv(out / "levels.csv", rows, file_meta(cfg, "Hartree"))
        cols = {"x": grid.x, "V": v}
        for i, eps in zip(levels.labels, levels.epsilons):
            cols[f"orb_{i}"] = np.abs(orbitals[i - 1]) ** 2 + eps
        io.write_csv(out / "potential.csv", cols, file_meta(cfg, "bohr, Hartree"))
        return levels

    gs = ground_state(cfg)
    eps = list(gs.levels.epsilons)
    labels = list(gs.levels.labels)
    occ = [1] * n_occ
    n_un = cfg["ground.n_unoccupied"]
    if n_un > 0:
        un, _ = unoccupied_states(gs.potential, grid, n_occ + 1, n_un,
                                  cfg["ground.unoccupied_method"])
        eps += list(un.epsilons)
        labels += list(un.labels)
        occ += [0] * n_un
    io.write_csv(out / "levels.csv", {"label": np.array(labels), "epsilon": np.array(eps),
                                      "occupied": np.array(occ)},
                 file_meta(cfg, "Hartree", iterations=gs.iterations, drift=gs.drift))
    cols = {"x": grid.x, "V_KS": gs.potential.total, "V_ion": gs.potential.ionic,
            "V_H": gs.potential.hartree, "V_xc": gs.potential.xc}
    for i, e in zip(gs.levels.labels, gs.levels.epsilons):
        cols[f"orb_{i}"] = np.abs(gs.orbitals[i - 1]) ** 2 + e
    io.write_csv(out / "potential.csv", cols, file_meta(cfg, "bohr, Hartree; orb_i = |phi_i|^2 + eps_i"))
    io.save_ground_state(out / "ground.gs", gs, {"config_hash": cfg.hash})
    return gs


def load_or_solve(cfg: RunConfig, path: str | None) -> GroundState:
    if path:
        gs = io.load_ground_state(path)
        if gs.grid != cfg.grid() or gs.lattice != cfg.lattice():
            raise ConfigError("ground", f"ground state in {path} was computed for another grid/lattice")
        return gs
    return ground_state(cfg)


# kick -------------------------------------------------------------------

def cmd_kick(cfg: RunConfig, out: Path, gs: GroundState | None = None) -> dict:
    gs = gs or ground_state(cfg)
    mode = cfg["kick.mode"]
    variants = {"unfrozen": [False], "frozen": [True], "both": [False, True]}[mode]
    kappa = cfg["drive.kick_strength"]
    spectra, records = {}, {}
    for frozen in variants:
        rec = kick_run(gs, kappa, cfg["kick.T_record"], frozen, cfg["propagation.dt"], cfg.absorber())
        key = "frozen" if frozen else "unfrozen"
        records[key] = rec
        spectra[key] = (power_spectrum(rec, taper=cfg["kick.taper"], pad=cfg["kick.pad"]),
                        orbital_power_spectra(rec, cfg["kick.taper"], cfg["kick.pad"]))
    meta = file_meta(cfg, "time a.u., dipole bohr", kick_strength=kappa)
    for key, rec in records.items():
        cols = {"t": rec.times, "D": rec.total}
        cols.update({f"d_{i + 1}": rec.orbital[:, i] for i in range(rec.orbital.shape[1])})
        io.write_csv(out / f"dipole_{key}.csv", cols, meta)

    main_key = variants[0] and "frozen" or "unfrozen"
    total, orbs = spectra[main_key]
    cols = {"Omega": total.omega, "P_total": total.power}
    if "frozen" in spectra and main_key != "frozen":
        cols["P_frozen"] = spectra["frozen"][0].power
    cols.update({f"P_{i + 1}": s.power for i, s in enumerate(orbs)})
    sel = total.omega <= 1.0
    io.write_csv(out / "spectrum.csv", {k: v[sel] for k, v in cols.items()},
                 file_meta(cfg, "Omega Hartree, P arbitrary (Omega^4 |FFT D|^2)",
                           taper=total.taper, record_length=total.record_length))
    catalogs = {key: classify_modes(t, o).as_dict() for key, (t, o) in spectra.items()}
    io.write_json(out / "modes.json", {"config_hash": cfg.hash, "kick_strength": kappa,
                                       "resolution": total.resolution, **catalogs})
    return spectra


# spectrum ---------------------------------------------------------------

def run_pulse(cfg: RunConfig, gs: GroundState | None, a0: float | None = None,
              checkpoint_path: Path | None = None, resume: bool = False):
    """Propagate with the configured drive and return the surface record."""
    grid = cfg.grid()
    surfaces = cfg.surfaces()
    rec = SurfaceRecorder(surfaces)
    if cfg["drive.kind"] == "packet":
        drive = NoDrive()
        pcfg = PropagationConfig(cfg["propagation.dt"], cfg["propagation.t_end"], True, cfg.absorber())
        psi0 = gaussian_packet(grid, cfg["packet.x0"], cfg["packet.width"], cfg["packet.k0"])
        prop = Propagator(grid, cfg.lattice(), psi0, drive, pcfg, np.zeros(grid.n_points))
    else:
        drive = cfg.drive(a0)
        pcfg = cfg.propagation(drive)
        pcfg.check_drive(drive)
        prop = Propagator.from_ground_state(gs, drive, pcfg)
    meta = {"config_hash": cfg.hash, "tau": pcfg.t_end, "a0": getattr(drive, "a0", 0.0),
            "omega_L": getattr(drive, "omega", 0.0), "n_cyc": getattr(drive, "n_cyc", 0)}
    observe_initial = True
    if resume and checkpoint_path is not None and checkpoint_path.exists():
        ckpt, _, partial = io.load_checkpoint(checkpoint_path)
        prop.restore(ckpt)
        if partial is not None:
            rec.extend(partial)
        observe_initial = False
    every = cfg["propagation.checkpoint_every"]

    def on_checkpoint(ckpt):
        io.save_checkpoint(checkpoint_path, ckpt, {"config_hash": cfg.hash},
                           rec.record(pcfg.dt, meta))

    prop.run([rec], observe_initial=observe_initial,
             checkpoint_every=every if checkpoint_path is not None else None,
             on_checkpoint=on_checkpoint)
    return rec.record(pcfg.dt, meta), prop


def write_spectrum(cfg: RunConfig, spec, out: Path, levels: EnergyLevels | None = None,
                   prefix: str = "") -> None:
    orbitals = [i for i in cfg["spectrum.orbitals"] if 1 <= i <= spec.per_orbital.shape[0]]
    meta = file_meta(cfg, "k a.u., E Hartree, Y per unit k", **spec.metadata)
    cols = {"k": spec.k, "E": 0.5 * spec.k ** 2, "Y_total": spec.total}
    cols.update({f"Y_{i}": spec.per_orbital[i - 1] for i in orbitals})
    if cfg["drive.kind"] == "packet":
        cols["Y_analytic"] = packet_momentum_density(spec.k, cfg["packet.width"], cfg["packet.k0"])
    io.write_csv(out / f"{prefix}spectrum_k.csv", cols, meta)
    E, Y, Yi = spec.energy()
    cols = {"E": E, "Y_total": Y}
    cols.update({f"Y_{i}": Yi[i - 1] for i in orbitals})
    io.write_csv(out / f"{prefix}spectrum_E.csv", cols, meta)
    if levels is not None and cfg["drive.kind"] == "pulse":
        write_peaks(cfg, E, Y, levels, out / f"{prefix}peaks.csv")


def write_peaks(cfg: RunConfig, E, Y, levels: EnergyLevels, path: Path) -> None:
    """Detected peaks with the ATI / plasmon ladder rung each one matches (0 = none)."""
    E_max = cfg["analysis.E_max"]
    peaks = peak_positions(E, Y, cfg["analysis.prominence"], "log", (1e-3, E_max))
    tol = max(cfg["kgrid.dk"] * math.sqrt(2 * E_max), 2e-3)
    top = range(max(1, levels.n_occupied - 2), levels.n_occupied + 1)
    cols = {"E": np.array([p.position for p in peaks]), "height": np.array([p.height for p in peaks]),
            "fwhm": np.array([p.fwhm for p in peaks]),
            "prominence": np.array([p.prominence for p in peaks])}
    for name, omega in (("ati", cfg["drive.omega"]), ("plasmonA", cfg["analysis.omega_A"]),
                        ("plasmonB", cfg["analysis.omega_B"])):
        ladders = predicted_peaks(levels, omega, E_max + omega, orbitals=top)
        orb = np.zeros(len(peaks), dtype=int)
        order = np.zeros(len(peaks), dtype=int)
        for j, p in enumerate(peaks):
            m = match_ladder([p], ladders, tol)
            if m:
                orb[j], order[j] = m[0][1], m[0][2]
        cols[f"{name}_orbital"] = orb
        cols[f"{name}_order"] = order
    io.write_csv(path, cols, file_meta(cfg, "E Hartree", match_tolerance=tol))


def cmd_spectrum(cfg: RunConfig, out: Path, gs: GroundState | None = None, resume: bool = False):
    if cfg["drive.kind"] == "kick":
        raise ConfigError("drive.kind", "the spectrum command needs a pulse, packet or no drive")
    if cfg["drive.kind"] != "packet":
        gs = gs or ground_state(cfg)
    ckpt = out / "run.ckpt" if cfg["propagation.checkpoint_every"] > 0 or resume else None
    record, _ = run_pulse(cfg, gs, checkpoint_path=ckpt, resume=resume)
    io.save_surface_record(out / "surface.rec", record)
    spec = spectrum(accumulate(record, cfg.kgrid()), record.metadata)
    write_spectrum(cfg, spec, out, gs.levels if gs is not None else None)
    return record, spec


# gabor ------------------------------------------------------------------

def cmd_gabor(cfg: RunConfig, out: Path, record_path: str | None = None):
    path = Path(record_path) if record_path else out / "surface.rec"
    if not path.exists():
        raise FileNotFoundError(f"surface record {path} not found (run 'tdks1d spectrum' first)")
    record = io.load_surface_record(path)
    sigma = cfg.gabor_sigma()
    centers = np.arange(record.t[0], record.t[-1] + 1e-9, cfg.gabor_spacing())
    kg = MomentumGrid(cfg["gabor.k_max"], cfg["gabor.dk"])
    wmap = windowed_spectrum(record, kg, centers, sigma)
    tc = np.repeat(wmap.centers, len(wmap.energy))
    E = np.tile(wmap.energy, len(wmap.centers))
    io.write_csv(out / "gabor.csv", {"t_c": tc, "E": E, "Y": wmap.yields.ravel()},
                 file_meta(cfg, "t a.u., E Hartree", sigma_t=sigma, omega_L=cfg["drive.omega"],
                           record=str(path)))
    return wmap


# scan -------------------------------------------------------------------

def scan_windows(cfg: RunConfig, levels: EnergyLevels) -> tuple[EnergyWindow, EnergyWindow]:
    w_L = cfg["drive.omega"]
    w_P = cfg["scan.plasmon_omega"]
    eps = levels[cfg["scan.ati_level"]]
    order = cfg["scan.ati_order"] or math.ceil(-eps / w_L)
    e_ati = eps + order * w_L
    e_pl = levels[cfg["scan.plasmon_level"]] + cfg["scan.plasmon_order"] * w_P
    hw_a = cfg["scan.ati_halfwidth"] or w_L / 4
    hw_p = cfg["scan.plasmon_halfwidth"] or w_P / 10
    for key, e in (("scan.ati_order", e_ati), ("scan.plasmon_order", e_pl)):
        if e <= 0:
            raise ConfigError(key, f"window centre E = {e:.4g} is not in the continuum")
    # a near-threshold rung may put the lower edge below E = 0
    return (EnergyWindow(max(e_ati - hw_a, 0.0), e_ati + hw_a, "ATI"),
            EnergyWindow(max(e_pl - hw_p, 0.0), e_pl + hw_p, "plasmon"))


def _scan_member(args):
    cfg_text, gs, a0, out = args
    cfg = RunConfig.from_text(cfg_text)
    record, _ = run_pulse(cfg, gs, a0)
    sub = Path(out) / f"a0_{a0:g}"
    sub.mkdir(parents=True, exist_ok=True)
    io.save_surface_record(sub / "surface.rec", record)
    spec = spectrum(accumulate(record, cfg.kgrid()), record.metadata)
    write_spectrum(cfg.replace(drive__a0=a0), spec, sub, gs.levels)
    E, Y, _ = spec.energy()
    return a0, E, Y


def cmd_scan(cfg: RunConfig, out: Path, gs: GroundState | None = None) -> dict:
    amps = cfg["scan.a0"]
    if len(amps) < 3:
        raise ConfigError("scan.a0", f"an intensity fit needs at least 3 amplitudes, got {len(amps)}")
    if cfg["drive.kind"] != "pulse":
        raise ConfigError("drive.kind", "scan needs drive.kind = pulse")
    gs = gs or ground_state(cfg)
    ati, pl = scan_windows(cfg, gs.levels)
    jobs = [(cfg.to_text(), gs, a0, str(out)) for a0 in amps]
    if cfg["scan.jobs"] > 1:
        with ProcessPoolExecutor(cfg["scan.jobs"]) as pool:
            results = list(pool.map(_scan_member, jobs))
    else:
        results = [_scan_member(j) for j in jobs]
    report = {"config_hash": cfg.hash, "omega_L": cfg["drive.omega"], "fits": {}}
    for win in (ati, pl):
        pts = [(a0, window_yield((E, Y), win)) for a0, E, Y in results]
        fit = scaling_exponent(pts, cfg["drive.omega"])
        report["fits"][win.role] = {"window": [win.lo, win.hi], **fit.as_dict()}
    io.write_json(out / "scaling.json", report)
    return report


# analyze ----------------------------------------------------------------

def cmd_analyze(cfg: RunConfig, out: Path, spectrum_path: str | None = None,
                gs: GroundState | None = None):
    path = Path(spectrum_path) if spectrum_path else out / "spectrum_E.csv"
    if not path.exists():
        raise FileNotFoundError(f"spectrum file {path} not found")
    _, cols = io.read_csv(path)
    if "E" not in cols or "Y_total" not in cols:
        raise ConfigError("spectrum", f"{path} lacks E / Y_total columns")
    gs = gs or ground_state(cfg)
    write_peaks(cfg, cols["E"], cols["Y_total"], gs.levels, out / "peaks.csv")
    return out / "peaks.csv"


# entry point ------------------------------------------------------------

def _parse_overrides(pairs) -> dict:
    out = {}
    for p in pairs or []:
        key, sep, val = p.partition("=")
        if not sep:
            raise ConfigError(p, "override must look like key=value")
        out[key.strip()] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdks1d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("ground", "self-consistent ground state and KS levels"),
                        ("kick", "delta-kick linear response spectra"),
                        ("spectrum", "laser-driven run and t-SURFF photoelectron spectrum"),
                        ("gabor", "time-windowed t-SURFF map from a stored surface record"),
                        ("scan", "amplitude scan and intensity-scaling exponents"),
                        ("analyze", "peak detection and ladder assignment of a spectrum")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("-c", "--config", help="config file (key = value lines)")
        p.add_argument("-s", "--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("-o", "--out", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("kick", "spectrum", "scan", "analyze"):
            p.add_argument("--ground", help="reuse a ground state file written by 'ground'")
        if name == "spectrum":
            p.add_argument("--resume", action="store_true", help="continue from out/run.ckpt")
        if name == "gabor":
            p.add_argument("--record", help="surface record (default: out/surface.rec)")
        if name == "analyze":
            p.add_argument("--spectrum", help="spectrum_E.csv to analyze")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _parse_overrides(args.set)
        cfg = RunConfig.load(args.config, overrides) if args.config else RunConfig.from_text("", overrides)
        out = output_dir(cfg, args.out)
        (out / "config.txt").write_text(cfg.to_text())
        gs = None
        if getattr(args, "ground", None):
            gs = load_or_solve(cfg, args.ground)
        if args.command == "ground":
            cmd_ground(cfg, out)
        elif args.command == "kick":
            cmd_kick(cfg, out, gs)
        elif args.command == "spectrum":
            cmd_spectrum(cfg, out, gs, resume=args.resume)
        elif args.command == "gabor":
            cmd_gabor(cfg, out, args.record)
        elif args.command == "scan":
            report = cmd_scan(cfg, out, gs)
            for role, fit in report["fits"].items():
                print(f"{role}: n = {fit['exponent']:.3f} (residual {fit['residual']:.3g})")
        elif args.command == "analyze":
            cmd_analyze(cfg, out, args.spectrum, gs)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
