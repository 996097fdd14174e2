"""Adaptive harmonic extension of interface displacements into the fluid mesh.

Small elements get a larger diffusion coefficient ``1 + tau_m`` so that they
absorb less of the deformation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import FESpace, Field, ParameterError, TraceSpace, assemble, field_at_quadrature, interpolate
from .mesh import GeometryError, Tag, Triangulation, element_area_stats
from .sparse import DirichletLift, SparseSystem

AREA_RATIO_RTOL = 1e-12


def compute_tau_m(tri: Triangulation) -> np.ndarray:
    """Per-element stiffening ``(1 - a_min/a_max) / (a_e/a_max)``."""
    a_min, a_max, areas = element_area_stats(tri)
    ratio = a_min / a_max
    if ratio > 1.0 - AREA_RATIO_RTOL:
        ratio = 1.0  # areas equal up to rounding: uniform mesh, no stiffening
    return (1.0 - ratio) * a_max / areas


@dataclass(frozen=True, eq=False)
class MeshMotion:
    tau_m: np.ndarray
    displacement: Field

    def velocity(self, previous: "MeshMotion", dt: float) -> np.ndarray:
        """Backward difference of the extension displacement."""
        return (self.displacement.values - previous.displacement.values) / dt


class HarmonicExtension:
    """Factorised weighted-Laplace operator, reused for both components and all calls."""

    def __init__(self, tri: Triangulation, degree: int = 1, interface_tag=Tag.INTERFACE):
        self.tri = tri
        self.tau_m = compute_tau_m(tri)
        self.scalar = FESpace(tri, degree, 1)
        self.vector = FESpace(tri, degree, 2)
        self.trace = TraceSpace(self.vector, interface_tag)
        self.stiffness = assemble("WEIGHTED_DIFFUSION", self.scalar, tau_m=self.tau_m)
        boundary_tags = tuple(tri.boundary_edges)
        self.boundary_nodes = self.scalar.boundary_nodes(*boundary_tags)
        interface_nodes = self.trace.nodes
        self._is_interface = np.isin(self.boundary_nodes, interface_nodes)
        pos = {int(n): i for i, n in enumerate(interface_nodes)}
        self._interface_slot = np.array([pos.get(int(n), -1) for n in self.boundary_nodes])
        self.lift = DirichletLift(self.stiffness, self.boundary_nodes)
        self.system = SparseSystem(self.lift.matrix).factor()

    def boundary_values(self, interface_values: np.ndarray) -> np.ndarray:
        """Dirichlet data ``(n_boundary_nodes, 2)``: interface data on the interface, zero elsewhere."""
        iv = np.asarray(interface_values, dtype=float).reshape(-1, 2)
        out = np.zeros((self.boundary_nodes.size, 2))
        out[self._is_interface] = iv[self._interface_slot[self._is_interface]]
        return out

    def solve_with_boundary(self, boundary_values: np.ndarray) -> Field:
        """Componentwise solve with explicit data on every boundary node."""
        bv = np.asarray(boundary_values, dtype=float).reshape(-1, 2)
        zero = np.zeros(self.scalar.ndofs)
        cols = [self.system.solve(self.lift.apply(zero, bv[:, c])) for c in range(2)]
        return Field(self.vector, np.column_stack(cols).reshape(-1))

    def extend(self, interface_displacement) -> MeshMotion:
        """Extension of a trace field (or callable evaluated on the interface)."""
        if isinstance(interface_displacement, Field):
            values = interface_displacement.values
        elif callable(interface_displacement):
            values = interpolate(interface_displacement, self.trace).values
        else:
            values = np.asarray(interface_displacement, dtype=float)
        if values.shape != (self.trace.ndofs,):
            raise ParameterError(f"interface displacement has shape {values.shape}, "
                                 f"expected ({self.trace.ndofs},)")
        if not np.all(np.isfinite(values)):
            raise ParameterError("interface displacement is not finite")
        field = self.solve_with_boundary(self.boundary_values(values))
        return MeshMotion(self.tau_m, field)


def extend_displacement(tri: Triangulation, interface_displacement, degree: int = 1) -> Field:
    return HarmonicExtension(tri, degree).extend(interface_displacement).displacement


def _aspect_ratios(v: np.ndarray, t: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """Longest edge times perimeter over ``4 sqrt(3) area``; one for equilateral triangles."""
    a, b, c = (v[t[:, k]] for k in range(3))
    lengths = np.stack([np.linalg.norm(b - a, axis=1), np.linalg.norm(c - b, axis=1),
                        np.linalg.norm(a - c, axis=1)], axis=1)
    with np.errstate(divide="ignore"):
        ratio = lengths.max(axis=1) * lengths.sum(axis=1) / (4.0 * np.sqrt(3.0) * areas)
    return np.where(areas > 0, ratio, np.inf)


def mesh_quality_report(tri: Triangulation, displacement) -> tuple[float, float]:
    """``(min signed area, worst aspect ratio)`` after moving the vertices.

    Vertex values are the first ``n_vertices`` nodes of the displacement's space.
    """
    if isinstance(displacement, Field):
        nodal = displacement.nodal()
    else:
        nodal = np.asarray(displacement, dtype=float).reshape(-1, 2)
    if len(nodal) < tri.n_vertices:
        raise GeometryError("displacement does not cover every vertex")
    moved = tri.vertices + nodal[: tri.n_vertices]
    areas = tri.signed_areas(moved)
    return float(areas.min()), float(_aspect_ratios(moved, tri.triangles, areas).max())


def displacement_gradient_norms(field: Field) -> np.ndarray:
    """Area-averaged Frobenius norm of the displacement gradient on each element."""
    _, grads = field_at_quadrature(field)
    _, _, _, wq = field.space.quadrature()
    mag = np.sqrt(np.sum(grads ** 2, axis=(-1, -2)))
    return np.sum(wq * mag, axis=1) / np.sum(wq, axis=1)
