"""Acceptance criteria of the artifact, one test per criterion.

Each test records a single PASS/FAIL line (collected in the terminal summary)
and then asserts at the stated tolerance.  The convergence sweeps at h = 1/32
are computed once per module and shared by criteria 1 to 3.
"""

import os
import time

import numpy as np
import pytest

from acceptance_log import record
from oracle import assemble_dense
from rrfsi.ale import HarmonicExtension, compute_tau_m, displacement_gradient_norms
from rrfsi.config import DEFAULT_DT_SWEEP
from rrfsi.fem import FESpace, assemble
from rrfsi.fluid import FluidStepSystem, fluid_step
from rrfsi.harness import (
    INTERFACE_NORMAL,
    ERROR_NAMES,
    ManufacturedCase,
    convergence_study,
    forcing_terms,
    forcing_terms_fd,
    manufactured_run,
    stability_study,
)
from rrfsi.mesh import Tag, Triangulation, build_layered_rect_mesh, element_area_stats, refine_triangle, unit_square

NX = 32  # h = 1/32
T_FINAL = 0.5
CASE = ManufacturedCase()


@pytest.fixture(scope="module")
def sweeps():
    return {L: convergence_study(NX, DEFAULT_DT_SWEEP, L=L, T_final=T_FINAL, case=CASE)
            for L in (1.0, 50.0, 500.0)}


def _slopes(rep):
    return ", ".join(f"{n}={rep.slopes[n]:.3f}" for n in ERROR_NAMES)


@pytest.mark.slow
def test_criterion_1_first_order_for_small_L(sweeps):
    rep = sweeps[1.0]
    ok = all(0.8 <= rep.slopes[n] <= 1.2 for n in ("e_u", "e_xi", "e_eta"))
    record(1, "L=1 slopes of e_u, e_xi, e_eta in [0.8, 1.2]", ok, _slopes(rep))
    assert ok, rep.slopes


@pytest.mark.slow
def test_criterion_2_errors_grow_with_L(sweeps):
    k = DEFAULT_DT_SWEEP.index(0.1 / 16)
    e = {L: {n: sweeps[L].errors[n][k] for n in ERROR_NAMES} for L in sweeps}
    ok = all(e[1.0][n] < e[50.0][n] < e[500.0][n] for n in ERROR_NAMES)
    detail = "; ".join(f"{n}: " + " < ".join(f"{e[L][n]:.3e}" for L in (1.0, 50.0, 500.0))
                       for n in ERROR_NAMES)
    record(2, "errors at dt=0.1/16 strictly increase over L = 1, 50, 500", ok, detail)
    assert ok, e


@pytest.mark.slow
def test_criterion_3_large_L_rate(sweeps):
    rep = sweeps[500.0]
    ok = all(rep.slopes[n] >= 0.4 for n in ERROR_NAMES)
    record(3, "L=500 slopes >= 0.4 on the default sweep", ok, _slopes(rep))
    assert ok, rep.slopes


STABILITY_RUNS = [(L, dt) for L in (1.0, 1000.0) for dt in (0.1, 0.001)]


@pytest.fixture(scope="module")
def stability_runs():
    out = {}
    for L, dt in STABILITY_RUNS:
        start = time.perf_counter()
        res = stability_study(16, dt, L, L, 200, seed=0, parallel=True)
        out[(L, dt)] = (res, time.perf_counter() - start)
    return out


def test_criterion_4_unconditional_stability(stability_runs):
    parts, ok = [], True
    for (L, dt), (res, secs) in stability_runs.items():
        rows = res.ledger.rows
        final_ok = rows[-1].E <= rows[0].bound_E0_plus_I0 * (1 + 1e-8) + 1e-8
        this = res.passed is True and len(rows) == 201 and final_ok
        ok &= this
        parts.append(f"L={L:g} dt={dt:g}: {'ok' if this else 'violated'} ({secs:.1f}s)")
    total = sum(s for _, s in stability_runs.values())
    ok &= total < 120.0
    record(4, "energy inequality at every step, 200 steps, L1=L2 in {1, 1000}, dt in {0.1, 0.001}",
           ok, "; ".join(parts) + f"; total {total:.1f}s")
    assert ok


def test_criterion_5_interface_identity(stability_runs):
    defects = {f"stability L={L:g} dt={dt:g}": res.ledger.max_interface_defect
               for (L, dt), (res, _) in stability_runs.items()}
    for L in (1.0, 50.0):
        _, _, ledger = manufactured_run(8, 0.025, L, 0.5, CASE, return_state=True)
        defects[f"manufactured L={L:g}"] = ledger.max_interface_defect
    worst = max(defects.values())
    ok = worst <= 1e-10
    record(5, "u - xi = ((F+S)^n - F^{n+1} - S^{n+1}) / L dof-wise at every step", ok,
           f"max defect {worst:.2e} over {len(defects)} runs")
    assert ok, defects


def test_criterion_6_parallel_determinism():
    par = stability_study(16, 0.01, 1.0, 1.0, 50, seed=3, parallel=True)
    seq = stability_study(16, 0.01, 1.0, 1.0, 50, seed=3, parallel=False)
    same = [r.as_tuple() for r in par.ledger.rows] == [r.as_tuple() for r in seq.ledger.rows]
    cores = os.cpu_count() or 1
    if cores >= 2:
        par = stability_study(32, 0.01, 1.0, 1.0, 50, seed=3, parallel=True)
        wall = np.mean([t.wall for t in par.timings])
        solve_sum = np.mean([t.fluid + t.structure for t in par.timings])
        fast = wall <= 0.75 * solve_sum
        speed = f"concurrent wall/step {wall * 1e3:.2f} ms vs sequential solve sum {solve_sum * 1e3:.2f} ms"
    else:
        fast = True
        speed = f"speedup clause N/A: only {cores} CPU, two tasks cannot overlap"
    ok = same and fast
    record(6, "concurrent and sequential 50-step ledgers bitwise identical; speedup <= 0.75x", ok,
           ("ledgers identical" if same else "ledgers differ") + "; " + speed)
    assert same
    assert fast


FORMS = [
    ("MASS", 1, 1, {}),
    ("MASS", 2, 1, {}),
    ("MASS", 2, 2, {}),
    ("VISCOUS", 2, 2, {"mu_f": 1.3}),
    ("ELASTICITY", 2, 2, {"mu_s": 0.7, "lambda_s": 1.9}),
    ("INTERFACE_MASS", 2, 2, {}),
]


def test_criterion_7_assembly_oracle():
    mesh = build_layered_rect_mesh((0, 1, 0, 1), (0, 1, -1, 0), 2, 2)
    worst = 0.0
    for tri in (mesh.fluid, mesh.structure):
        edges = tri.edges_with_tag(Tag.INTERFACE)
        for kind, degree, comps, coef in FORMS:
            V = FESpace(tri, degree, comps)
            O = assemble_dense(kind, tri.vertices, tri.triangles, V.node_coords, degree, comps,
                               boundary_edges=edges, **coef)
            worst = max(worst, np.abs(assemble(kind, V, **coef).toarray() - O).max())
    tri = mesh.fluid
    V, Q = FESpace(tri, 2, 2), FESpace(tri, 1, 1)
    O = assemble_dense("DIVERGENCE", tri.vertices, tri.triangles, V.node_coords, 2, 2,
                       test_coords=Q.node_coords, test_degree=1)
    worst = max(worst, np.abs(assemble("DIVERGENCE", V, Q).toarray() - O).max())
    graded = refine_triangle(unit_square(2), 3)
    tau = compute_tau_m(graded)
    W = FESpace(graded, 1, 1)
    O = assemble_dense("WEIGHTED_DIFFUSION", graded.vertices, graded.triangles, W.node_coords, 1, 1, tau_m=tau)
    worst = max(worst, np.abs(assemble("WEIGHTED_DIFFUSION", W, tau_m=tau).toarray() - O).max())

    rng = np.random.default_rng(7)
    fs = FluidStepSystem(tri, 1.0, 1.0, 1.0, 0.1)
    u_prev, r = rng.standard_normal(fs.nu), rng.standard_normal(fs.trace.ndofs)
    f = lambda x, y, t: (np.cos(x - y), x + y * y)  # noqa: E731
    g = lambda x, y, t: y - 0.5  # noqa: E731
    u, p = fluid_step(fs, u_prev, r, body_force=f, mass_source=g, dirichlet=f, t=0.2)
    K = fs.K.toarray()
    b = fs.rhs(u_prev, r, f, g, 0.2)
    K[fs.dirichlet_dofs, :] = 0.0
    K[fs.dirichlet_dofs, fs.dirichlet_dofs] = 1.0
    b[fs.dirichlet_dofs] = fs.dirichlet_values(f, 0.2)
    stokes = np.abs(np.concatenate([u.values, p.values]) - np.linalg.solve(K, b)).max()
    ok = worst <= 1e-10 and stokes <= 1e-9
    record(7, "2x2 operators match the quadrature oracle to 1e-10; Stokes solve matches dense to 1e-9",
           ok, f"max entry deviation {worst:.2e}; Stokes deviation {stokes:.2e}")
    assert ok


def test_criterion_8_ale_operator():
    checks = {}
    checks["uniform tau = 0"] = np.all(compute_tau_m(unit_square(6)) == 0.0)
    v = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    half = Triangulation(v, np.array([[0, 1, 2], [0, 2, 3]]), {})
    tau = compute_tau_m(half)
    checks["ratio 1/2: tau(min)=1, tau(max)=1/2"] = tau[1] == 1.0 and tau[0] == 0.5

    graded = refine_triangle(unit_square(8), 54)
    ext = HarmonicExtension(graded)
    rng = np.random.default_rng(11)
    d1, d2 = rng.standard_normal(ext.trace.ndofs), rng.standard_normal(ext.trace.ndofs)
    lin = np.abs(ext.extend(2.5 * d1 - 1.5 * d2).displacement.values
                 - 2.5 * ext.extend(d1).displacement.values
                 + 1.5 * ext.extend(d2).displacement.values).max()
    checks["linearity"] = lin <= 1e-10

    g = displacement_gradient_norms(ext.extend(lambda x, y, t: (0 * x, 0 * x + 0.1)).displacement)
    _, _, areas = element_area_stats(graded)
    small, large = g[areas == areas.min()].mean(), g[areas == areas.max()].mean()
    checks["graded stiffening"] = small < large
    ok = all(checks.values())
    record(8, "tau_m examples exact; extension linear to 1e-10; small elements deform less", ok,
           f"linearity defect {lin:.1e}; mean |grad d| small {small:.4f} vs large {large:.4f}"
           + "".join(f"; failed: {k}" for k, v in checks.items() if not v))
    assert ok, checks


def test_criterion_9_manufactured_self_consistency():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        x = rng.uniform(0, 1)
        y = rng.uniform(-1, 1)
        t = rng.uniform(0, 1)
        a, b = forcing_terms(CASE, (x, y), t), forcing_terms_fd(CASE, (x, y), t)
        worst = max(worst, max(np.abs(np.asarray(p) - np.asarray(q)).max() for p, q in zip(a, b)))
    n = np.array(INTERFACE_NORMAL)
    jump = trac = 0.0
    for _ in range(50):
        x, t = rng.uniform(0, 1), rng.uniform(0, 2)
        X, Y = np.array([x]), np.array([0.0])
        jump = max(jump, np.abs(np.array(CASE.u(X, Y, t)) - np.array(CASE.xi(X, Y, t))).max())
        for sig in (CASE.sigma_f, CASE.sigma_s):
            s = np.array(sig(X, Y, t))[:, :, 0]
            trac = max(trac, np.abs(s @ n).max())
    ok = worst <= 1e-6 and jump <= 1e-12 and trac <= 1e-12
    record(9, "symbolic vs finite-difference forcings to 1e-6 at 100 points; u = xi, zero tractions on the interface",
           ok, f"forcing deviation {worst:.1e}; |u - xi| {jump:.1e}; |sigma n| {trac:.1e}")
    assert ok
