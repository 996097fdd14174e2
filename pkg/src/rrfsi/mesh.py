"""Layered rectangular triangulations for the coupled fluid/structure problem."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class GeometryError(ValueError):
    """Raised for inconsistent or degenerate geometry."""


class Tag(str, Enum):
    INLET = "INLET"
    OUTLET = "OUTLET"
    WALL = "WALL"
    INTERFACE = "INTERFACE"
    STRUCTURE_OUTER = "STRUCTURE_OUTER"


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise GeometryError(f"degenerate rectangle {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @classmethod
    def from_seq(cls, seq) -> "Rect":
        if isinstance(seq, Rect):
            return seq
        x0, x1, y0, y1 = (float(v) for v in seq)
        return cls(x0, x1, y0, y1)


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Vertices, counterclockwise triangles and tagged boundary edges."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, *self.boundary_edges.values()):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self, vertices: np.ndarray | None = None) -> np.ndarray:
        v = self.vertices if vertices is None else vertices
        a, b, c = (v[self.triangles[:, k]] for k in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                      - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))

    def edges_with_tag(self, tag: Tag) -> np.ndarray:
        return self.boundary_edges.get(Tag(tag), np.zeros((0, 2), dtype=np.int64))

    def topological_boundary(self) -> set:
        """Edges (as sorted vertex pairs) belonging to exactly one triangle."""
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return {tuple(row) for row in uniq[counts == 1]}


@dataclass(frozen=True, eq=False)
class CoupledMesh:
    fluid: Triangulation
    structure: Triangulation
    interface_pairs: np.ndarray
    n_f: np.ndarray  # one unit normal per fluid interface edge, pointing out of the fluid

    def __post_init__(self):
        self.interface_pairs.setflags(write=False)
        self.n_f.setflags(write=False)

    @property
    def n_s(self) -> np.ndarray:
        return -self.n_f


def element_area_stats(tri: Triangulation):
    """Return ``(area_min, area_max, per_element_areas)``."""
    if tri.n_triangles == 0:
        raise GeometryError("empty triangulation")
    areas = tri.signed_areas()
    if np.any(areas <= 0.0):
        bad = int(np.flatnonzero(areas <= 0.0)[0])
        raise GeometryError(f"triangle {bad} has non-positive area {areas[bad]:.3e}")
    return float(areas.min()), float(areas.max()), areas


def _grid(rect: Rect, nx: int, ny: int):
    xs = np.linspace(rect.x0, rect.x1, nx + 1)
    ys = np.linspace(rect.y0, rect.y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    I, J = I.ravel(), J.ravel()
    v00, v10, v01, v11 = vid(I, J), vid(I + 1, J), vid(I, J + 1), vid(I + 1, J + 1)
    # every cell split along its (0,0)-(1,1) diagonal
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    i = np.arange(nx)
    j = np.arange(ny)
    sides = {
        "bottom": np.column_stack([vid(i, 0), vid(i + 1, 0)]),
        "top": np.column_stack([vid(i, ny), vid(i + 1, ny)]),
        "left": np.column_stack([vid(0, j), vid(0, j + 1)]),
        "right": np.column_stack([vid(nx, j), vid(nx, j + 1)]),
    }
    return vertices, triangles.astype(np.int64), {k: v.astype(np.int64) for k, v in sides.items()}


_OPPOSITE = {"bottom": "top", "top": "bottom", "left": "right", "right": "left"}
_NORMAL = {"bottom": (0.0, -1.0), "top": (0.0, 1.0), "left": (-1.0, 0.0), "right": (1.0, 0.0)}


def _shared_side(fluid: Rect, structure: Rect, tol: float = 1e-12) -> str:
    """Side of the fluid rectangle that coincides with a full side of the structure."""
    same_x = abs(fluid.x0 - structure.x0) <= tol and abs(fluid.x1 - structure.x1) <= tol
    same_y = abs(fluid.y0 - structure.y0) <= tol and abs(fluid.y1 - structure.y1) <= tol
    if same_x and abs(fluid.y0 - structure.y1) <= tol:
        return "bottom"
    if same_x and abs(fluid.y1 - structure.y0) <= tol:
        return "top"
    if same_y and abs(fluid.x0 - structure.x1) <= tol:
        return "left"
    if same_y and abs(fluid.x1 - structure.x0) <= tol:
        return "right"
    raise GeometryError(f"rectangles {fluid} and {structure} do not share a full edge")


def build_layered_rect_mesh(fluid_rect, structure_rect, nx: int, ny: int) -> CoupledMesh:
    """Structured triangulations of two rectangles sharing one full edge.

    ``nx`` and ``ny`` are the cell counts in x and y used for *each* rectangle,
    so the shared edge carries the same nodes on both sides.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    fr = fluid_rect if isinstance(fluid_rect, Rect) else Rect.from_seq(fluid_rect)
    sr = structure_rect if isinstance(structure_rect, Rect) else Rect.from_seq(structure_rect)
    side = _shared_side(fr, sr)

    fv, ft, fsides = _grid(fr, nx, ny)
    sv, st, ssides = _grid(sr, nx, ny)

    # inflow/outflow sit on the sides transverse to the interface
    transverse = ("left", "right") if side in ("bottom", "top") else ("bottom", "top")
    fluid_tags = {
        Tag.INTERFACE: fsides[side],
        Tag.WALL: fsides[_OPPOSITE[side]],
        Tag.INLET: fsides[transverse[0]],
        Tag.OUTLET: fsides[transverse[1]],
    }
    s_side = _OPPOSITE[side]
    structure_tags = {
        Tag.INTERFACE: ssides[s_side],
        Tag.STRUCTURE_OUTER: np.concatenate([ssides[k] for k in ("bottom", "right", "top", "left")
                                             if k != s_side]),
    }

    f_ids = np.unique(fsides[side])
    s_ids = np.unique(ssides[s_side])
    # both id lists run along the shared edge in the same direction
    pairs = np.column_stack([f_ids, s_ids]).astype(np.int64)
    if not np.allclose(fv[f_ids], sv[s_ids], atol=1e-12, rtol=0.0):
        raise GeometryError("interface nodes do not coincide")
    sv = sv.copy()
    sv[s_ids] = fv[f_ids]  # bitwise coincident interface coordinates

    n_f = np.tile(np.array(_NORMAL[side]), (nx if side in ("bottom", "top") else ny, 1))
    return CoupledMesh(
        fluid=Triangulation(fv, ft, fluid_tags),
        structure=Triangulation(sv, st, structure_tags),
        interface_pairs=pairs,
        n_f=n_f,
    )


def unit_square(n: int) -> Triangulation:
    """Fluid layer of the unit-square layered mesh, handy for tests."""
    return build_layered_rect_mesh((0, 1, 0, 1), (0, 1, -1, 0), n, n).fluid


def refine_triangle(tri: Triangulation, element: int) -> Triangulation:
    """Red-refine one triangle and bisect its neighbours so the result stays conforming.

    The refined children have a quarter of the parent's area; each neighbour
    sharing an edge is split into two halves through the new midpoint.
    """
    v = np.asarray(tri.vertices, dtype=float)
    t = np.asarray(tri.triangles)
    a, b, c = t[element]
    mids = {}
    new_vertices = [v]
    next_id = len(v)
    for p, q in ((a, b), (b, c), (c, a)):
        key = (min(p, q), max(p, q))
        mids[key] = next_id
        new_vertices.append(0.5 * (v[p] + v[q])[None, :])
        next_id += 1
    vertices = np.concatenate(new_vertices)

    def mid(p, q):
        return mids.get((min(p, q), max(p, q)))

    out = []
    for e, (p, q, r) in enumerate(t):
        if e == element:
            mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
            out += [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
            continue
        split = [(i, mid(x, y)) for i, (x, y) in enumerate(((p, q), (q, r), (r, p))) if mid(x, y) is not None]
        if not split:
            out.append((p, q, r))
            continue
        i, m = split[0]
        x, y, z = np.roll([p, q, r], -i)  # edge (x, y) carries the midpoint m
        out += [(x, m, z), (m, y, z)]

    boundary = {}
    for tag, edges in tri.boundary_edges.items():
        rows = []
        for p, q in edges:
            m = mid(p, q)
            rows += [(p, q)] if m is None else [(p, m), (m, q)]
        boundary[tag] = np.array(rows, dtype=np.int64).reshape(-1, 2)
    return Triangulation(vertices, np.array(out, dtype=np.int64), boundary)
