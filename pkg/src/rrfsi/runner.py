"""Drivers behind the CLI subcommands.  Each takes a validated RunConfig."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import sympy as sp

from . import output, plots
from .ale import HarmonicExtension, displacement_gradient_norms, mesh_quality_report
from .config import ConfigError, RunConfig
from .fem import FESpace, TraceSpace
from .harness import (
    ERROR_NAMES,
    ManufacturedCase,
    convergence_study,
    final_errors,
    manufactured_initial_state,
    random_initial_state,
    stability_study,
    steps_for,
)
from .mesh import Rect, build_layered_rect_mesh, element_area_stats, refine_triangle
from .orchestrator import BoundaryData, EnergyLedger, Forcing, Parameters, build_systems, run_steps

log = logging.getLogger(__name__)


def parameters(cfg: RunConfig) -> Parameters:
    return Parameters(cfg.rho_f, cfg.mu_f, cfg.rho_s, cfg.mu_s, cfg.lambda_s, cfg.L1, cfg.L2)


def coupled_mesh(cfg: RunConfig):
    return build_layered_rect_mesh(Rect.from_seq(cfg.fluid_rect), Rect.from_seq(cfg.structure_rect),
                                   cfg.nx, cfg.ny)


def _case(cfg: RunConfig) -> ManufacturedCase:
    return ManufacturedCase(cfg.rho_f, cfg.mu_f, cfg.rho_s, cfg.mu_s, cfg.lambda_s)


# ------------------------------------------------------------------ mesh-info


def mesh_info(cfg: RunConfig) -> dict:
    mesh = coupled_mesh(cfg)
    info = {}
    for name, tri in (("fluid", mesh.fluid), ("structure", mesh.structure)):
        a_min, a_max, _ = element_area_stats(tri)
        V = FESpace(tri, 2, 2)
        info[name] = {
            "vertices": tri.n_vertices,
            "triangles": tri.n_triangles,
            "velocity_dofs": V.ndofs,
            "interface_dofs": TraceSpace(V).ndofs,
            "area_min": a_min,
            "area_max": a_max,
        }
    info["fluid"]["pressure_dofs"] = FESpace(mesh.fluid, 1, 1).ndofs
    if cfg.dump_fields:
        out = Path(cfg.out)
        output.write_vtk(out / "mesh_fluid.vtk", mesh.fluid)
        output.write_vtk(out / "mesh_structure.vtk", mesh.structure)
    return info


# ------------------------------------------------------------------ converge


def converge(cfg: RunConfig) -> list:
    """Convergence sweep for every coupling parameter in ``cfg.L_values``."""
    case = _case(cfg)
    reports = []
    for L in cfg.L_values:
        log.info("convergence sweep L=%g over %d time steps", L, len(cfg.dt_sweep))
        reports.append(convergence_study(cfg.nx, cfg.dt_sweep, L=L, T_final=cfg.T, case=case,
                                         parallel=cfg.parallel, ny=cfg.ny))
    out = Path(cfg.out)
    output.write_errors(out / "errors.csv", reports)
    output.write_slopes(out / "slopes.csv", reports)
    if cfg.plot:
        plots.plot_convergence(reports, out / "convergence.png")
    return reports


# ------------------------------------------------------------------ stability


def stability(cfg: RunConfig):
    res = stability_study(cfg.nx, cfg.dt, cfg.L1, cfg.L2, cfg.steps, seed=cfg.seed,
                          parallel=cfg.parallel, amplitude=cfg.amplitude, params=parameters(cfg),
                          ny=cfg.ny, fluid_rect=cfg.fluid_rect, structure_rect=cfg.structure_rect)
    _write_run_outputs(cfg, res.ledger, res.timings)
    return res


def _write_run_outputs(cfg: RunConfig, ledger: EnergyLedger, timings) -> None:
    out = Path(cfg.out)
    output.write_ledger(out / "ledger.csv", ledger.rows)
    output.write_timings(out / "timings.csv", timings)
    if cfg.plot:
        plots.plot_energy(ledger.rows, out / "energy.png")


# ------------------------------------------------------------------ run


@dataclass
class RunResult:
    state: object
    ledger: EnergyLedger
    timings: list
    errors: dict | None = None
    dumps: list = field(default_factory=list)


def run(cfg: RunConfig) -> RunResult:
    """Time loop for ``cfg.problem``: forced manufactured data or the unforced stability setup."""
    steps = steps_for(cfg.T, cfg.dt)
    mesh = coupled_mesh(cfg)
    fluid, structure = build_systems(mesh, parameters(cfg), cfg.dt)
    if cfg.problem == "manufactured":
        case = _case(cfg)
        try:
            state = manufactured_initial_state(case, fluid, structure)
        except ValueError as exc:
            raise ConfigError("fluid_rect", str(exc)) from exc
        forcing, boundary = case.forcing(), case.boundary()
    else:
        case = None
        state = random_initial_state(fluid, structure, Rect.from_seq(cfg.fluid_rect),
                                     Rect.from_seq(cfg.structure_rect), cfg.seed, cfg.amplitude)
        forcing, boundary = Forcing(), BoundaryData()

    out = Path(cfg.out)
    dumps = []
    if cfg.dump_fields:
        dumps += output.write_state_vtk(out / "fields", 0, state)

    def dump(s):
        if cfg.dump_fields and (s.n % cfg.dump_interval == 0 or s.n == steps):
            dumps.extend(output.write_state_vtk(out / "fields", s.n, s))

    # the energy bound only applies to the unforced, homogeneous problem
    ledger = EnergyLedger(check_inequality=case is None and cfg.L1 == cfg.L2)
    state, ledger, timings = run_steps(state, steps, forcing, boundary, parallel=cfg.parallel,
                                       ledger=ledger, callback=dump)
    _write_run_outputs(cfg, ledger, timings)
    errors = None
    if case is not None:
        errors = final_errors(state, case, fluid.V, structure.V)
        output.write_csv(out / "final_errors.csv", ("t",) + ERROR_NAMES,
                         [(state.t,) + tuple(errors[n] for n in ERROR_NAMES)])
    return RunResult(state, ledger, timings, errors, dumps)


# ------------------------------------------------------------------ ale-demo


_X, _Y = sp.symbols("x y", real=True)


def parse_displacement(text: str):
    """``"ux, uy"`` in ``x`` and ``y`` to a vectorised callable ``f(x, y, t)``."""
    try:
        parsed = sp.parse_expr(f"({text})", local_dict={"x": _X, "y": _Y, "pi": sp.pi})
    except Exception as exc:  # sympy raises a zoo of types here
        raise ConfigError("displacement", f"cannot parse {text!r}: {exc}") from exc
    exprs = list(parsed) if isinstance(parsed, (tuple, sp.Tuple)) else [parsed]
    if len(exprs) != 2:
        raise ConfigError("displacement", f"expected two comma-separated components, got {text!r}")
    extra = set().union(*(e.free_symbols for e in exprs)) - {_X, _Y}
    if extra:
        raise ConfigError("displacement", f"unknown symbols {sorted(map(str, extra))}")
    fns = [sp.lambdify((_X, _Y), e, "numpy") for e in exprs]

    def f(x, y, t=0.0):
        return [np.broadcast_to(np.asarray(fn(x, y), dtype=float), np.shape(x)) for fn in fns]

    return f


@dataclass
class AleResult:
    tri: object
    motion: object
    min_area: float
    worst_aspect: float
    grad_norms: np.ndarray


def ale_demo(cfg: RunConfig) -> AleResult:
    """Extend an interface displacement into the (optionally refined) fluid mesh."""
    tri = coupled_mesh(cfg).fluid
    for e in cfg.refine:
        if not 0 <= e < tri.n_triangles:
            raise ConfigError("refine", f"element {e} out of range 0..{tri.n_triangles - 1}")
        tri = refine_triangle(tri, e)
    disp = parse_displacement(cfg.displacement)
    ext = HarmonicExtension(tri)
    motion = ext.extend(disp)
    nodal = motion.displacement.nodal()
    min_area, worst = mesh_quality_report(tri, motion.displacement)
    grads = displacement_gradient_norms(motion.displacement)
    out = Path(cfg.out)
    output.write_vtk(out / "ale_displaced.vtk", tri, {"displacement": nodal[: tri.n_vertices]},
                     {"tau_m": motion.tau_m, "grad_norm": grads}, vertices=tri.vertices + nodal[: tri.n_vertices])
    areas = tri.signed_areas()
    output.write_csv(out / "ale_elements.csv", ("element", "area", "tau_m", "grad_norm"),
                     [(k, areas[k], motion.tau_m[k], grads[k]) for k in range(tri.n_triangles)])
    if cfg.plot:
        plots.plot_mesh(tri, nodal, motion.tau_m, out / "ale_mesh.png")
    return AleResult(tri, motion, min_area, worst, grads)
