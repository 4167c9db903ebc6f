"""Binary trajectory snapshots and delimited audit reports.

Snapshot record layout, little-endian throughout: magic "WVLW", format
version u32, nine f64 parameters (Lx, Ly, Nx, Ny, h, g, rho, sigma, t),
then eta and q as row-major f64 node arrays. A trajectory file is a
plain concatenation of records; every record repeats the grid block so
any record is self-describing. The sample time rides in the parameter
block because restarting a run needs it.
"""

from __future__ import annotations

import csv
import struct
from typing import BinaryIO, Sequence

import numpy as np

from .audit import DensityReport
from .grid import PeriodicGrid, SurfaceState, make_grid

MAGIC = b"WVLW"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<4sI9d")

# area-integral units per law; rates and residuals divide by seconds
_INTEGRAL_UNITS = ("m^4/s", "m^4/s", "m^5/s^2", "m^3", "m^4/s", "m^4",
                   "m^4", "m^4", "m^5/s", "m^5/s", "m^5/s", "m^5/s")
_RATE_UNITS = ("m^4/s^2", "m^4/s^2", "m^5/s^3", "m^3/s", "m^4/s^2",
               "m^4/s", "m^4/s", "m^4/s", "m^5/s^2", "m^5/s^2",
               "m^5/s^2", "m^5/s^2")


def snapshot_bytes(grid: PeriodicGrid, state: SurfaceState) -> bytes:
    state.validate(grid)
    head = _HEAD.pack(MAGIC, FORMAT_VERSION, grid.Lx, grid.Ly,
                      float(grid.Nx), float(grid.Ny), grid.h, grid.g,
                      grid.rho, grid.sigma, state.t)
    body = (np.ascontiguousarray(state.eta, dtype="<f8").tobytes()
            + np.ascontiguousarray(state.q, dtype="<f8").tobytes())
    return head + body


def write_snapshot(fh: BinaryIO, grid: PeriodicGrid,
                   state: SurfaceState) -> None:
    fh.write(snapshot_bytes(grid, state))


def read_snapshot(fh: BinaryIO):
    """Read one record; returns (grid, state) or None at end of file."""
    head = fh.read(_HEAD.size)
    if not head:
        return None
    if len(head) < _HEAD.size:
        raise ValueError("truncated snapshot header")
    magic, version, *params = _HEAD.unpack(head)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {version}")
    Lx, Ly, fNx, fNy, h, g, rho, sigma, t = params
    Nx, Ny = int(fNx), int(fNy)
    if Nx != fNx or Ny != fNy or Nx <= 0 or Ny <= 0:
        raise ValueError(f"bad node counts {fNx} x {fNy}")
    grid = make_grid(Lx, Ly, Nx, Ny, h, g, rho, sigma)
    count = Nx * Ny
    raw = fh.read(2 * count * 8)
    if len(raw) < 2 * count * 8:
        raise ValueError("truncated snapshot body")
    flat = np.frombuffer(raw, dtype="<f8")
    eta = flat[:count].reshape(Nx, Ny).copy()
    q = flat[count:].reshape(Nx, Ny).copy()
    return grid, SurfaceState(t, eta, q)


def save_trajectory(path: str, grid: PeriodicGrid,
                    states: Sequence[SurfaceState]) -> None:
    with open(path, "wb") as fh:
        for state in states:
            write_snapshot(fh, grid, state)


def load_trajectory(path: str):
    """Read every record; all records must share one grid."""
    states = []
    grid = None
    with open(path, "rb") as fh:
        while True:
            rec = read_snapshot(fh)
            if rec is None:
                break
            g, state = rec
            if grid is None:
                grid = g
            elif g != grid:
                raise ValueError("trajectory mixes different grids")
            states.append(state)
    if grid is None:
        raise ValueError(f"no snapshots in {path}")
    return grid, states


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_density_report(path: str, report: DensityReport) -> None:
    """One row per audit sample: integrals, rates, residuals, conditions."""
    cols = ["time[s]"]
    cols += [f"integral_T{i+1}[{u}]" for i, u in enumerate(_INTEGRAL_UNITS)]
    cols += [f"rhs_T{i+1}[{u}]" for i, u in enumerate(_RATE_UNITS)]
    cols += [f"residual_T{i+1}[{u}]" for i, u in enumerate(_RATE_UNITS)]
    cols += ["cond_fit[-]", "cond_kinematic[-]"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for j, t in enumerate(report.times):
            row = [_fmt(t)]
            row += [_fmt(v) for v in report.density_integrals[:, j]]
            row += [_fmt(v) for v in report.rhs_values[:, j]]
            row += [_fmt(v) for v in report.residuals[:, j]]
            row += [_fmt(report.cond_fit[j]), _fmt(report.cond_kinematic[j])]
            w.writerow(row)


def _probe_units(label: str) -> tuple[str, str]:
    degree = int(label.rsplit("_", 1)[1])
    return f"m^{degree + 2}/s", f"m^{degree + 2}/s^2"


def write_probe_report(path: str, report: DensityReport) -> None:
    """Both probe residuals per sample, split into parts, with scales."""
    cols = ["time[s]"]
    for lab in report.probe_labels:
        u1, u2 = _probe_units(lab)
        cols += [f"{lab}_R1_re[{u1}]", f"{lab}_R1_im[{u1}]",
                 f"{lab}_R1_scale[{u1}]", f"{lab}_R2_re[{u2}]",
                 f"{lab}_R2_im[{u2}]", f"{lab}_R2_scale[{u2}]"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for j, t in enumerate(report.times):
            row = [_fmt(t)]
            for p in range(len(report.probe_labels)):
                row += [_fmt(report.probe_residual_1[p, j].real),
                        _fmt(report.probe_residual_1[p, j].imag),
                        _fmt(report.probe_scale_1[p, j]),
                        _fmt(report.probe_residual_2[p, j].real),
                        _fmt(report.probe_residual_2[p, j].imag),
                        _fmt(report.probe_scale_2[p, j])]
            w.writerow(row)
