"""Snapshot and manifest persistence.

Snapshot format: one header line ``nx ny lx ly t`` followed by row-major node
values, one value per line, one block per field component.  Deliberately
primitive so any tool can diff or parse it.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from ..grid import Grid, ScalarField2D, VectorField2D


def output_root() -> Path:
    return Path(os.environ.get("NEMATICFLOW_OUTDIR", "runs"))


def write_snapshot(path, field: ScalarField2D | VectorField2D, t: float) -> None:
    g = field.grid
    comps = field.data if field.data.ndim == 3 else field.data[None]
    with open(path, "w") as fh:
        fh.write(f"{g.nx} {g.ny} {g.lx:.17g} {g.ly:.17g} {t:.17g}\n")
        for c in comps:
            for val in c.ravel(order="C"):
                fh.write(f"{val:.17g}\n")


def read_snapshot(path) -> tuple[ScalarField2D | VectorField2D, float]:
    with open(path) as fh:
        header = fh.readline().split()
        nx, ny = int(header[0]), int(header[1])
        lx, ly, t = float(header[2]), float(header[3]), float(header[4])
        values = np.array([float(line) for line in fh])
    g = Grid(nx, ny, lx, ly)
    n = nx * ny
    if values.size == n:
        return ScalarField2D(g, values.reshape(nx, ny)), t
    if values.size == 2 * n:
        return VectorField2D(g, values.reshape(2, nx, ny)), t
    raise ValueError(f"snapshot holds {values.size} values, expected {n} or {2*n}")


def write_manifest(path, lines: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
