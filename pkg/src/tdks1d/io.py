"""On-disk formats.

Binary containers (checkpoints, ground states, surface records)::

    magic   8 bytes   b"TDKS" + 4-byte kind tag (b"CKPT", b"GRND", b"SREC")
    version uint32    little-endian
    endian  1 byte    b"<"
    hlen    uint64    little-endian length of the JSON header
    header  JSON      metadata + {"arrays": [{name, dtype, shape, offset, nbytes}]}
    payload           raw little-endian C-order array bytes

CSV files start with ``# key: value`` comment lines (config hash, units,
embedded config) followed by one header row; floats use ``%.17g`` so
values round-trip exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .dynamics import Checkpoint, DriveState
from .grid import SpatialGrid
from .groundstate import EnergyLevels, GroundState
from .potentials import IonicLattice, KSPotential
from .tsurff import SurfaceRecord

FORMAT_VERSION = 1
_KINDS = {"checkpoint": b"CKPT", "ground": b"GRND", "surface": b"SREC"}


class FormatError(ValueError):
    pass


def write_container(path, kind: str, meta: dict, arrays: dict) -> None:
    entries, blobs, offset = [], [], 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        raw = a.tobytes()
        entries.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({**meta, "arrays": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(b"TDKS" + _KINDS[kind])
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(b"<")
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def read_container(path, kind: str) -> tuple[dict, dict]:
    data = Path(path).read_bytes()
    if data[:8] != b"TDKS" + _KINDS[kind]:
        raise FormatError(f"{path}: not a {kind} file (magic {data[:8]!r})")
    (version,) = struct.unpack("<I", data[8:12])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if data[12:13] != b"<":
        raise FormatError(f"{path}: unsupported endianness tag {data[12:13]!r}")
    (hlen,) = struct.unpack("<Q", data[13:21])
    meta = json.loads(data[21:21 + hlen])
    base = 21 + hlen
    arrays = {}
    for e in meta.pop("arrays"):
        start = base + e["offset"]
        buf = data[start:start + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(buf, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return meta, arrays


def save_surface_record(path, rec: SurfaceRecord) -> None:
    meta = {"dt": rec.dt, "x_left": rec.x_left, "x_right": rec.x_right,
            "n_orbitals": rec.n_orbitals, "metadata": rec.metadata}
    arrays = {name: getattr(rec, name) for name in
              ("t", "A", "alpha", "quiver_phase", "phi_left", "dphi_left", "phi_right", "dphi_right")}
    write_container(path, "surface", meta, arrays)


def load_surface_record(path) -> SurfaceRecord:
    meta, a = read_container(path, "surface")
    return SurfaceRecord(meta["dt"], meta["x_left"], meta["x_right"], a["t"], a["A"], a["alpha"],
                         a["quiver_phase"], a["phi_left"], a["dphi_left"], a["phi_right"],
                         a["dphi_right"], meta.get("metadata", {}))


def save_checkpoint(path, ckpt: Checkpoint, meta: dict | None = None,
                    record: SurfaceRecord | None = None) -> None:
    ds = ckpt.drive_state
    header = {"step": ckpt.step, "t": ds.t, "A": ds.A, "alpha": ds.alpha,
              "quiver_phase": ds.quiver_phase, "samples": ckpt.samples, "meta": meta or {}}
    arrays = {"orbitals": ckpt.orbitals}
    if record is not None:
        header["record"] = {"dt": record.dt, "x_left": record.x_left, "x_right": record.x_right}
        for name in ("t", "A", "alpha", "quiver_phase", "phi_left", "dphi_left",
                     "phi_right", "dphi_right"):
            arrays["record_" + name] = getattr(record, name)
    write_container(path, "checkpoint", header, arrays)


def load_checkpoint(path) -> tuple[Checkpoint, dict, SurfaceRecord | None]:
    h, a = read_container(path, "checkpoint")
    ckpt = Checkpoint(h["step"], a["orbitals"],
                      DriveState(h["t"], h["A"], h["alpha"], h["quiver_phase"]), h["samples"])
    record = None
    if "record" in h:
        r = h["record"]
        record = SurfaceRecord(r["dt"], r["x_left"], r["x_right"],
                               *(a["record_" + n] for n in ("t", "A", "alpha", "quiver_phase",
                                                            "phi_left", "dphi_left", "phi_right",
                                                            "dphi_right")))
    return ckpt, h["meta"], record


def save_ground_state(path, gs: GroundState, meta: dict | None = None) -> None:
    header = {"grid": [gs.grid.n_points, gs.grid.dx],
              "lattice": [gs.lattice.n_ions, gs.lattice.spacing, gs.lattice.softening],
              "n_occupied": gs.levels.n_occupied, "iterations": gs.iterations,
              "drift": gs.drift, "meta": meta or {}}
    write_container(path, "ground", header, {
        "orbitals": gs.orbitals, "epsilons": gs.levels.epsilons,
        "v_ionic": gs.potential.ionic, "v_hartree": gs.potential.hartree, "v_xc": gs.potential.xc,
    })


def load_ground_state(path) -> GroundState:
    h, a = read_container(path, "ground")
    grid = SpatialGrid(*h["grid"])
    lattice = IonicLattice(*h["lattice"])
    pot = KSPotential(a["v_ionic"], a["v_hartree"], a["v_xc"])
    return GroundState(grid, lattice, a["orbitals"], EnergyLevels(a["epsilons"], h["n_occupied"]),
                       pot, h["iterations"], h["drift"])


def write_csv(path, columns: dict, meta: dict | None = None) -> None:
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("CSV columns differ in length")
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]
    lines.append(",".join(names))
    fmt = []
    for c in cols:
        fmt.append((lambda v: str(int(v))) if np.issubdtype(c.dtype, np.integer)
                   else (lambda v: "%.17g" % v))
    for i in range(n):
        lines.append(",".join(f(c[i]) for f, c in zip(fmt, cols)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> tuple[dict, dict]:
    meta, rows, names = {}, [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = v.strip()
        elif names is None:
            names = line.split(",")
        elif line:
            rows.append([float(v) for v in line.split(",")])
    data = np.array(rows) if rows else np.zeros((0, len(names or [])))
    return meta, {n: data[:, i] for i, n in enumerate(names or [])}


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")
