"""Trajectory export: norm tables and raw coefficient dumps.

Binary layout, repeated once per time node (all little-endian)::

    int64 d, int64 N, int64 n, float64 L, float64 t
    complex128 coefficients, shape (n, N, ..., N), row-major,
    lattice in numpy FFT order (k = 0, 1, ..., N/2 - 1, -N/2, ..., -1)
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .solver import SolutionTrajectory
from .spectral import FourierGrid, Lp, SpectralField, component_norms

HEADER = struct.Struct("<qqqdd")
NORM_COLUMNS = ("time", "component", "norm_Hs", "norm_L2")


def norm_records(traj: SolutionTrajectory, s: float | None = None) -> list[dict]:
    """One record per (time, component) with its H^s and L^2 norms."""
    hs = traj.hs_norms(s)
    rows = []
    for m, t in enumerate(traj.times):
        l2 = component_norms(traj.state(m), Lp(2))
        for i in range(traj.spec.n):
            rows.append({"time": float(t), "component": i, "norm_Hs": float(hs[m, i]), "norm_L2": float(l2[i])})
    return rows


def write_csv(path, rows: list[dict], columns) -> Path:
    """Write rows with a fixed column order; floats use their shortest repr."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row[k]) for k in columns})
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def write_norm_table(traj: SolutionTrajectory, path, s: float | None = None) -> Path:
    return write_csv(path, norm_records(traj, s), NORM_COLUMNS)


def dump_coefficients(traj: SolutionTrajectory, path) -> Path:
    g = traj.spec.grid
    path = Path(path)
    with path.open("wb") as fh:
        for m, t in enumerate(traj.times):
            fh.write(HEADER.pack(g.dimension, g.modes, traj.spec.n, g.length, float(t)))
            fh.write(np.ascontiguousarray(traj.states[m], dtype="<c16").tobytes())
    return path


def read_coefficients(path) -> list[tuple[float, SpectralField]]:
    """Inverse of ``dump_coefficients``: ``(t, field)`` per stored node."""
    data = Path(path).read_bytes()
    out, pos = [], 0
    while pos < len(data):
        if pos + HEADER.size > len(data):
            raise ValueError("truncated header in coefficient dump")
        d, N, n, L, t = HEADER.unpack_from(data, pos)
        pos += HEADER.size
        grid = FourierGrid(d, N, L)
        count = n * N**d
        nbytes = 16 * count
        if pos + nbytes > len(data):
            raise ValueError("truncated coefficient block in dump")
        c = np.frombuffer(data, dtype="<c16", count=count, offset=pos).reshape((n,) + grid.shape)
        pos += nbytes
        out.append((t, SpectralField(grid, c.astype(complex))))
    return out
