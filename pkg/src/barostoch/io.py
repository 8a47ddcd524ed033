"""Deterministic persistence: CSV with lowercase headers, '.' decimals and
LF line endings; floats written in shortest round-trip form so reruns are
byte-identical.  Summaries are JSON with sorted keys.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import DiagnosticsReport
from .fluid import Grid1D, PressureLaw, Trajectory, Viscosity, velocity
from .noise import NoiseField
from .paths import CadlagPath

__all__ = [
    "fmt",
    "write_csv",
    "write_path_csv",
    "read_path_csv",
    "write_trajectory",
    "write_metadata",
    "write_report",
    "noise_digest",
]


def fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def write_path_csv(path: CadlagPath, stem: Path) -> tuple[Path, Path]:
    """Continuous grid to <stem>.csv, jumps to <stem>.jumps.csv."""
    main = stem.with_suffix(".csv")
    write_csv(main, ["t", "value"], zip(path.grid_times.tolist(), path.continuous_values.tolist()))
    jumps = stem.with_suffix(".jumps.csv")
    write_csv(jumps, ["jump_time", "jump_size"], zip(path.jump_times.tolist(), path.jump_sizes.tolist()))
    return main, jumps


def read_path_csv(main: Path) -> CadlagPath:
    """Rebuild a path from <stem>.csv plus the sibling <stem>.jumps.csv."""
    main = Path(main)
    data = np.loadtxt(main, delimiter=",", skiprows=1, ndmin=2)
    t, v = data[:, 0], data[:, 1]
    jumps = main.with_name(main.stem + ".jumps.csv")
    jt = js = np.empty(0)
    if jumps.exists():
        jdata = np.loadtxt(jumps, delimiter=",", skiprows=1, ndmin=2)
        if jdata.size:
            jt, js = jdata[:, 0], jdata[:, 1]
    horizon = float(max(t[-1], jt[-1] if jt.size else 0.0))
    return CadlagPath(horizon, t, v, jt, js)


def write_trajectory(traj: Trajectory, grid: Grid1D, outdir: Path) -> list[Path]:
    """One snapshot CSV per output record: columns x, rho, m, u, w."""
    written = []
    x = grid.centers
    for idx, rec in enumerate(traj.output_records()):
        u = velocity(rec.rho, rec.m, grid)
        w = rec.w_cells
        name = outdir / f"snapshot_{idx:03d}_t{rec.t:.6f}.csv"
        write_csv(
            name,
            ["x", "rho", "m", "u", "w"],
            zip(x.tolist(), rec.rho.tolist(), rec.m.tolist(), u.tolist(), w.tolist()),
        )
        written.append(name)
    return written


def noise_digest(noise: NoiseField | None) -> str:
    if noise is None or not noise.paths:
        return "zero"
    h = hashlib.sha256()
    for mode, path in zip(noise.modes, noise.paths):
        for arr in (mode.values, path.grid_times, path.continuous_values, path.jump_times, path.jump_sizes):
            h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:12]


def write_metadata(
    outdir: Path,
    grid: Grid1D,
    law: PressureLaw,
    visc: Viscosity,
    seed: int,
    mass: float,
    digest: str,
    extra: dict | None = None,
) -> Path:
    meta = {
        "grid": {"n_cells": grid.n_cells, "length": grid.length},
        "pressure": {"gamma": law.gamma, "coeff": law.coeff},
        "viscosity": {"mu_shear": visc.mu_shear, "eta_bulk": visc.eta_bulk},
        "seed": seed,
        "total_mass": mass,
        "noise_digest": digest,
    }
    if extra:
        meta.update(extra)
    path = outdir / "metadata.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def write_report(report: DiagnosticsReport, outdir: Path) -> None:
    write_csv(
        outdir / "series.csv",
        ["t", "mass", "energy", "dissipation"],
        zip(
            report.output_times.tolist(),
            report.mass_series.tolist(),
            report.energy_series.tolist(),
            report.dissipation_series.tolist(),
        ),
    )
    write_csv(outdir / "energy_residuals.csv", ["s", "tau", "residual"], report.energy_residuals)
    write_csv(outdir / "renorm_residuals.csv", ["b", "phi", "residual"], report.renorm_residuals)
    rows = []
    for i, t in enumerate(report.output_times.tolist()):
        for j, name in enumerate(report.pairing_names):
            rows.append((t, name, float(report.weak_pairings[i, j])))
    write_csv(outdir / "weak_pairings.csv", ["t", "phi", "rho_pairing"], rows)
    summary = {
        "flags": report.flags,
        "all_pass": report.all_pass(),
        "mass_defect": report.mass_defect,
        "min_density": report.min_density,
        "jump_checks": report.jump_checks,
    }
    with open(outdir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
