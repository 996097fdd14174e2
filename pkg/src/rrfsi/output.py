"""CSV and legacy-VTK writers.

Floats are written with 17 significant digits so that parsing a file back
gives the in-memory doubles exactly.
"""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path

import numpy as np

from .harness import ERROR_NAMES, ErrorReport
from .mesh import Triangulation
from .orchestrator import EnergyRow, StepTiming

ERRORS_COLUMNS = ("L", "dt") + ERROR_NAMES
SLOPES_COLUMNS = ("L", "norm", "slope")
TIMINGS_COLUMNS = ("step", "fluid", "structure", "wall")


class OutputError(OSError):
    pass


def format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def _ensure_dir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise OutputError(f"output directory {path} is not writable")


def write_csv(path, columns, rows) -> Path:
    """Header plus one line per row; an empty ``rows`` gives a header-only file."""
    path = Path(path)
    _ensure_dir(path.parent)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                row = tuple(row)
                if len(row) != len(columns):
                    raise ValueError(f"row of length {len(row)} for {len(columns)} columns")
                w.writerow([format_value(v) for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def _parse(v: str):
    try:
        return float(v)
    except ValueError:
        return v


def read_csv(path):
    """``(columns, rows)``; numeric cells are parsed as floats, others kept as text."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        columns = tuple(next(r))
        rows = [tuple(_parse(v) for v in line) for line in r]
    return columns, rows


def write_ledger(path, rows) -> Path:
    return write_csv(path, EnergyRow.COLUMNS, (row.as_tuple() for row in rows))


def write_timings(path, timings) -> Path:
    return write_csv(path, TIMINGS_COLUMNS,
                     ((k + 1, t.fluid, t.structure, t.wall) for k, t in enumerate(timings)))


def write_errors(path, reports) -> Path:
    rows = [row for rep in reports for row in rep.rows()]
    return write_csv(path, ERRORS_COLUMNS, rows)


def write_slopes(path, reports) -> Path:
    rows = [(rep.L, name, rep.slopes[name]) for rep in reports for name in ERROR_NAMES]
    return write_csv(path, SLOPES_COLUMNS, rows)


# ------------------------------------------------------------------ VTK


def write_vtk(path, tri: Triangulation, point_data: dict | None = None, cell_data: dict | None = None,
              title: str = "rrfsi", vertices: np.ndarray | None = None) -> Path:
    """Legacy ASCII unstructured grid of linear triangles.

    ``point_data`` values are ``(n_vertices,)`` scalars or ``(n_vertices, 2)``
    vectors (written with a zero third component); ``cell_data`` likewise per
    triangle.  ``vertices`` overrides the coordinates, e.g. for a moved mesh.
    """
    path = Path(path)
    _ensure_dir(path.parent)
    v = tri.vertices if vertices is None else np.asarray(vertices, dtype=float)
    t = tri.triangles
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(v)} double"]
    lines += [f"{format_value(x)} {format_value(y)} 0" for x, y in v]
    lines.append(f"CELLS {len(t)} {4 * len(t)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in t]
    lines.append(f"CELL_TYPES {len(t)}")
    lines += ["5"] * len(t)
    for header, data, n in (("POINT_DATA", point_data, len(v)), ("CELL_DATA", cell_data, len(t))):
        if not data:
            continue
        lines.append(f"{header} {n}")
        for name, values in data.items():
            lines += _vtk_array(name, np.asarray(values, dtype=float), n)
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def _vtk_array(name: str, values: np.ndarray, n: int) -> list:
    name = name.replace(" ", "_")
    if values.shape == (n,):
        return [f"SCALARS {name} double 1", "LOOKUP_TABLE default"] + [format_value(x) for x in values]
    if values.shape == (n, 2):
        return [f"VECTORS {name} double"] + [f"{format_value(a)} {format_value(b)} 0" for a, b in values]
    raise ValueError(f"array {name!r} has shape {values.shape}, expected ({n},) or ({n}, 2)")


def write_state_vtk(directory, step: int, state) -> list:
    """Vertex values of the fluid and structure fields at one step."""
    directory = Path(directory)
    fl, st = state.fluid, state.structure
    nvf, nvs = fl.V.tri.n_vertices, st.V.tri.n_vertices
    u = np.asarray(state.u).reshape(-1, 2)[:nvf]
    p = np.asarray(state.p)[:nvf]
    eta = np.asarray(state.eta).reshape(-1, 2)[:nvs]
    xi = np.asarray(state.xi).reshape(-1, 2)[:nvs]
    return [
        write_vtk(directory / f"fluid_{step:06d}.vtk", fl.V.tri, {"u": u, "p": p}),
        write_vtk(directory / f"structure_{step:06d}.vtk", st.V.tri, {"eta": eta, "xi": xi}),
    ]
