import numpy as np
import pytest

from rrfsi.ale import (
    HarmonicExtension,
    compute_tau_m,
    displacement_gradient_norms,
    extend_displacement,
    mesh_quality_report,
)
from rrfsi.fem import FESpace, Field, ParameterError, assemble, interpolate
from rrfsi.sparse import DirichletLift, SparseSystem
from rrfsi.mesh import GeometryError, Triangulation, element_area_stats, refine_triangle, unit_square

PULL = (0.0, 0.1)


@pytest.fixture(scope="module")
def graded():
    """8x8 unit square with its central element refined once (area ratio 1/4)."""
    return refine_triangle(unit_square(8), 54)


def two_triangles_half():
    v = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    return Triangulation(v, np.array([[0, 1, 2], [0, 2, 3]]), {})


def test_tau_uniform_is_zero():
    assert np.all(compute_tau_m(unit_square(5)) == 0.0)


def test_tau_half_ratio():
    tri = two_triangles_half()
    a_min, a_max, areas = element_area_stats(tri)
    assert a_min / a_max == 0.5
    tau = compute_tau_m(tri)
    assert tau[np.argmin(areas)] == 1.0
    assert tau[np.argmax(areas)] == 0.5


def test_tau_nonnegative_and_rejects_degenerate(graded):
    tau = compute_tau_m(graded)
    assert np.all(tau >= 0)
    assert tau.min() == 0.75 and tau.max() == 3.0
    flat = Triangulation(np.array([[0.0, 0], [1, 0], [2, 0]]), np.array([[0, 1, 2]]), {})
    with pytest.raises(GeometryError):
        compute_tau_m(flat)


def test_zero_interface_data():
    ext = HarmonicExtension(unit_square(4))
    m = ext.extend(np.zeros(ext.trace.ndofs))
    assert np.all(m.displacement.values == 0)


def test_interface_data_and_zero_outer_boundary(graded):
    ext = HarmonicExtension(graded)
    d = ext.extend(lambda x, y, t: (np.sin(np.pi * x), x * (1 - x))).displacement.nodal()
    X = ext.scalar.node_coords
    on_gamma = ext.trace.nodes
    exact = np.column_stack([np.sin(np.pi * X[on_gamma, 0]), X[on_gamma, 0] * (1 - X[on_gamma, 0])])
    assert np.array_equal(d[on_gamma], exact)
    outer = np.setdiff1d(ext.boundary_nodes, on_gamma)
    assert np.all(d[outer] == 0.0)


def test_linear_data_reproduced():
    tri = unit_square(6)
    ext = HarmonicExtension(tri)
    X = ext.scalar.node_coords[ext.boundary_nodes]
    bv = np.column_stack([X[:, 1], X[:, 1]])
    d = ext.solve_with_boundary(bv).nodal()
    Y = ext.scalar.node_coords[:, 1]
    assert np.abs(d[:, 0] - Y).max() <= 1e-12
    assert np.abs(d[:, 1] - Y).max() <= 1e-12


def test_uniform_pull_maximum_principle():
    tri = unit_square(8)
    ext = HarmonicExtension(tri)
    A = ext.stiffness.toarray()
    off = A - np.diag(np.diag(A))
    assert off.max() <= 1e-14  # M-matrix structure on the right-triangle mesh
    d = np.array([0.03, -0.04])
    nodal = ext.extend(lambda x, y, t: (d[0] + 0 * x, d[1] + 0 * x)).displacement.nodal()
    assert np.linalg.norm(nodal, axis=1).max() <= np.linalg.norm(d) + 1e-14


def test_linearity(graded, rng):
    ext = HarmonicExtension(graded)
    d1, d2 = rng.standard_normal(ext.trace.ndofs), rng.standard_normal(ext.trace.ndofs)
    a, b = 1.7, -0.4
    lhs = ext.extend(a * d1 + b * d2).displacement.values
    rhs = a * ext.extend(d1).displacement.values + b * ext.extend(d2).displacement.values
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_quadratic_extension_space():
    tri = unit_square(4)
    d = extend_displacement(tri, lambda x, y, t: (0 * x, 0.1 * np.sin(np.pi * x)), degree=2)
    assert d.space.degree == 2
    assert np.abs(d.values).max() <= 0.1 + 1e-12


def test_stiffened_small_elements_deform_less(graded):
    ext = HarmonicExtension(graded)
    g = displacement_gradient_norms(ext.extend(lambda x, y, t: (0 * x + PULL[0], 0 * x + PULL[1])).displacement)
    _, _, areas = element_area_stats(graded)
    small = areas == areas.min()
    large = areas == areas.max()
    assert g[small].mean() < g[large].mean()


def test_stiffening_beats_plain_laplacian(graded):
    ext = HarmonicExtension(graded)
    pull = lambda x, y, t: (0 * x, 0 * x + PULL[1])
    g_stiff = displacement_gradient_norms(ext.extend(pull).displacement)
    # same mesh, unit coefficient
    V = FESpace(graded, 1, 1)
    A = assemble("WEIGHTED_DIFFUSION", V, tau_m=0.0)
    lift = DirichletLift(A, ext.boundary_nodes)
    bv = ext.boundary_values(interpolate(pull, ext.trace).values)
    cols = [SparseSystem(lift.matrix).solve(lift.apply(np.zeros(V.ndofs), bv[:, c])) for c in range(2)]
    plain = Field(ext.vector, np.column_stack(cols).reshape(-1))
    g_plain = displacement_gradient_norms(plain)
    small = np.isclose(graded.signed_areas(), graded.signed_areas().min())
    assert g_stiff[small].mean() < g_plain[small].mean()


def test_rejects_bad_interface_data():
    ext = HarmonicExtension(unit_square(3))
    with pytest.raises(ParameterError):
        ext.extend(np.zeros(ext.trace.ndofs + 2))
    bad = np.zeros(ext.trace.ndofs)
    bad[0] = np.nan
    with pytest.raises(ParameterError):
        ext.extend(bad)


def test_mesh_velocity():
    ext = HarmonicExtension(unit_square(3))
    m0 = ext.extend(np.zeros(ext.trace.ndofs))
    m1 = ext.extend(np.full(ext.trace.ndofs, 0.2))
    w = m1.velocity(m0, 0.1)
    assert np.allclose(w, m1.displacement.values / 0.1, rtol=0, atol=1e-15)


def test_quality_zero_and_translation():
    tri = unit_square(4)
    areas = tri.signed_areas()
    a0, r0 = mesh_quality_report(tri, np.zeros((tri.n_vertices, 2)))
    assert a0 == areas.min()
    a1, r1 = mesh_quality_report(tri, np.tile([0.3, -7.0], (tri.n_vertices, 1)))
    assert a1 == pytest.approx(a0, abs=1e-15) and r1 == pytest.approx(r0, rel=1e-12)


def test_quality_reports_collapse():
    tri = unit_square(2)
    disp = np.zeros((tri.n_vertices, 2))
    disp[4] = tri.vertices[0] - tri.vertices[4]  # centre vertex onto a corner
    min_area, worst = mesh_quality_report(tri, disp)
    assert min_area <= 0.0
    assert worst == np.inf


def test_quality_equilateral_ratio_one():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    tri = Triangulation(v, np.array([[0, 1, 2]]), {})
    assert mesh_quality_report(tri, np.zeros((3, 2)))[1] == pytest.approx(1.0, rel=1e-12)
