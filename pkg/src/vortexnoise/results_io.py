"""Result persistence: CSV tables, binary field snapshots, JSON manifests.

All writes are atomic (temp file in the target directory, then rename) and
deterministic: floats are serialized with shortest round-trip repr, so a
re-run with identical (config, seed) produces byte-identical files.

Snapshot format (extension .vnsf), little-endian:

    magic   4 bytes  "VNSF"
    version u32      1
    M       u32      lattice radius
    count   u64      number of modes
    modes   count x (kx: i32, ky: i32, kz: i32,
                     c1re: f64, c1im: f64, c2re: f64, c2im: f64,
                     c3re: f64, c3im: f64)

in lattice enumeration order (sorted by |k|^2 then kx, ky, kz).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__ as _pkg_version
from .fields import SpectralField
from .lattice import build_lattice

__all__ = ["Manifest", "write_csv", "write_manifest", "write_vnsf", "read_vnsf",
           "write_results", "format_float"]

_VNSF_MAGIC = b"VNSF"
_VNSF_VERSION = 1
_MODE_DTYPE = np.dtype([("k", "<i4", (3,)), ("re", "<f8", (3,)), ("im", "<f8", (3,))])


def format_float(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _atomic_bytes(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as ex:
        raise OSError(f"failed writing {path}: {ex}") from ex
    finally:
        if tmp.exists():
            tmp.unlink(missing_ok=True)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    _atomic_bytes(Path(path), ("\n".join(lines) + "\n").encode())


@dataclass
class Manifest:
    """Everything needed to re-run an experiment bit-exactly."""

    experiment: str
    config: dict
    params: dict = dc_field(default_factory=dict)
    seed_schedule: dict = dc_field(default_factory=dict)
    calibrated: dict = dc_field(default_factory=dict)
    theta_support: list = dc_field(default_factory=list)   # [[kx,ky,kz,weight],...]
    outputs: list = dc_field(default_factory=list)
    version: str = _pkg_version
    wall_clock_s: float = 0.0
    step_count: int = 0

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "artifact_version": self.version,
            "config": self.config,
            "params": self.params,
            "seed_schedule": self.seed_schedule,
            "calibrated_constants": self.calibrated,
            "theta_support": self.theta_support,
            "outputs": self.outputs,
            "wall_clock_s": self.wall_clock_s,
            "step_count": self.step_count,
        }


def theta_support_list(theta) -> list:
    sup = theta.support
    modes = theta.lattice.modes[sup]
    w = theta.weights[sup]
    return [[int(k[0]), int(k[1]), int(k[2]), float(wi)] for k, wi in zip(modes, w)]


def write_manifest(path, manifest: Manifest) -> None:
    payload = json.dumps(manifest.to_dict(), indent=2, sort_keys=True).encode()
    _atomic_bytes(Path(path), payload + b"\n")


def write_vnsf(path, field: SpectralField) -> None:
    lat = field.lattice
    header = struct.pack("<4sIIQ", _VNSF_MAGIC, _VNSF_VERSION, lat.M, lat.n_modes)
    body = np.empty(lat.n_modes, dtype=_MODE_DTYPE)
    body["k"] = lat.modes.astype(np.int32)
    body["re"] = np.real(field.coeffs)
    body["im"] = np.imag(field.coeffs)
    _atomic_bytes(Path(path), header + body.tobytes())


def read_vnsf(path) -> SpectralField:
    raw = Path(path).read_bytes()
    magic, version, M, count = struct.unpack_from("<4sIIQ", raw, 0)
    if magic != _VNSF_MAGIC:
        raise ValueError(f"{path}: not a VNSF snapshot (bad magic {magic!r})")
    if version != _VNSF_VERSION:
        raise ValueError(f"{path}: unsupported VNSF version {version}")
    body = np.frombuffer(raw, dtype=_MODE_DTYPE, count=count,
                         offset=struct.calcsize("<4sIIQ"))
    lat = build_lattice(int(M))
    if count != lat.n_modes or not np.array_equal(body["k"], lat.modes):
        raise ValueError(f"{path}: mode list does not match lattice radius {M}")
    coeffs = body["re"] + 1j * body["im"]
    return SpectralField(lat, np.ascontiguousarray(coeffs))


def write_results(out_dir, tables: dict, snapshots: list, manifest: Manifest) -> None:
    """Persist an experiment: tables {name: (header, rows)}, snapshots
    [(name, SpectralField)], manifest last so a complete directory always
    carries one."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in tables.items():
        write_csv(out / f"{name}.csv", header, rows)
        written.append(f"{name}.csv")
    for name, fld in snapshots:
        write_vnsf(out / f"{name}.vnsf", fld)
        written.append(f"{name}.vnsf")
    manifest.outputs = sorted(written)
    write_manifest(out / "manifest.json", manifest)
