"""Result files: error tables, solution dumps and the run manifest.

Floats are written with ``repr``, the shortest decimal that round-trips a
64-bit float, so identical runs give byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

from .grid import FineGrid


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _cell_arrays(grid: FineGrid, pressure=None, velocity=None, saturation=None, kappa=None) -> dict:
    out = {}
    if kappa is not None:
        out["permeability"] = np.asarray(kappa)
    if pressure is not None:
        out["pressure"] = np.asarray(pressure)
    if velocity is not None:
        vx, vy = velocity
        out["vx"], out["vy"] = np.asarray(vx), np.asarray(vy)
        out["flux_magnitude"] = np.hypot(vx, vy)
    if saturation is not None:
        out["saturation"] = np.asarray(saturation)
    for name, a in out.items():
        if a.shape != grid.shape:
            raise ValueError(f"{name} has shape {a.shape}, grid is {grid.shape}")
    return out


def dump_cells_csv(path, grid: FineGrid, **arrays) -> None:
    """One row per cell, x fastest: ``i, j, x, y`` then the given fields."""
    data = _cell_arrays(grid, **arrays)
    X, Y = grid.cell_centers()
    J, I = np.indices(grid.shape)
    cols = [I.ravel(), J.ravel(), X.ravel(), Y.ravel()] + [a.ravel() for a in data.values()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x", "y", *data])
        for r in range(grid.n_cells):
            w.writerow([int(cols[0][r]), int(cols[1][r])] + [repr(float(c[r])) for c in cols[2:]])


def dump_vtk(path, grid: FineGrid, title: str = "robinms", **arrays) -> None:
    """Legacy ASCII STRUCTURED_POINTS file with cell data."""
    data = _cell_arrays(grid, **arrays)
    lines = [
        "# vtk DataFile Version 3.0",
        title[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {fmt(grid.hx)} {fmt(grid.hy)} 1",
        f"CELL_DATA {grid.n_cells}",
    ]
    for name, a in data.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(v)) for v in a.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")


def file_digest(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def write_manifest(path, *, command: str, inputs: list, outputs: list, wall_time: float, extra=None) -> None:
    import scipy

    from . import __version__

    man = {
        "command": command,
        "inputs_sha256": file_digest(inputs),
        "inputs": [str(p) for p in inputs],
        "outputs": sorted(Path(p).name for p in outputs),
        "versions": {
            "robinms": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": wall_time,
    }
    if extra:
        man.update(extra)
    Path(path).write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
