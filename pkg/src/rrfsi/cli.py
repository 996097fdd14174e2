"""Command-line entry point: ``rrfsi <subcommand> [options]``.

Exit codes: 0 success, 1 a run completed but its stability check failed,
2 invalid input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import runner
from .config import EXTENDED_DT_SWEEP, ConfigError, RunConfig, defaults_help, from_mapping, load_config, parse_list
from .fem import ParameterError
from .mesh import GeometryError
from .orchestrator import StepError
from .output import OutputError, format_value
from .sparse import SolverError

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3

SUBCOMMANDS = ("mesh-info", "converge", "stability", "run", "ale-demo")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML or JSON run configuration")
    p.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--L1", type=float, help="fluid-side Robin parameter")
    p.add_argument("--L2", type=float, help="structure-side Robin parameter")
    p.add_argument("--nx", type=int, help="cells along the interface")
    p.add_argument("--ny", type=int, help="cells across each subdomain")
    p.add_argument("--seed", type=int, help="seed of the random initial data")
    p.add_argument("--dump-fields", action="store_true", default=None, help="write VTK field dumps")
    p.add_argument("--dump-interval", type=int, help="steps between VTK dumps")
    p.add_argument("--serial", action="store_true", help="run the two subproblems sequentially")
    p.add_argument("--plot", action="store_true", default=None,
                   help="also render PNG figures next to the CSV files")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrfsi",
        description="Parallel Robin-Robin partitioned solver for linear fluid-structure interaction.",
        epilog=defaults_help())
    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("mesh-info", help="mesh counts and element area range")
    _common(p)

    p = sub.add_parser("converge", help="manufactured-solution temporal convergence study")
    _common(p)
    p.add_argument("--dt-sweep", metavar="A,B,C", help="comma-separated time steps (descending)")
    p.add_argument("--extended", action="store_true", help="append dt=0.1/128 to the default sweep")
    p.add_argument("--L-values", metavar="A,B,C", help="coupling parameters to sweep (L1 = L2)")

    p = sub.add_parser("stability", help="unforced energy-stability run")
    _common(p)
    p.add_argument("--steps", type=int, help="number of steps (overrides --T as steps*dt)")
    p.add_argument("--amplitude", type=float, help="peak magnitude of the initial velocities")

    p = sub.add_parser("run", help="single time-dependent run")
    _common(p)
    p.add_argument("--problem", choices=("manufactured", "stability"), help="data set (default manufactured)")

    p = sub.add_parser("ale-demo", help="adaptive harmonic extension of an interface displacement")
    _common(p)
    p.add_argument("--displacement", metavar="EXPR",
                   help="interface displacement 'ux, uy' in x and y, e.g. '0, 0.1*sin(pi*x)'")
    p.add_argument("--refine", metavar="I,J", help="element indices to red-refine, in order")
    return parser


def config_from_args(args) -> RunConfig:
    overrides = {
        "mode": args.mode, "out": args.out, "dt": args.dt, "T": args.T, "L1": args.L1, "L2": args.L2,
        "nx": args.nx, "ny": args.ny, "seed": args.seed, "dump_fields": args.dump_fields,
        "dump_interval": args.dump_interval, "plot": args.plot,
    }
    if args.serial:
        overrides["parallel"] = False
    if getattr(args, "dt_sweep", None):
        overrides["dt_sweep"] = parse_list("dt_sweep", args.dt_sweep)
    elif getattr(args, "extended", False):
        overrides["dt_sweep"] = EXTENDED_DT_SWEEP
    if getattr(args, "L_values", None):
        overrides["L_values"] = parse_list("L_values", args.L_values)
    for key in ("problem", "displacement", "amplitude"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "refine", None):
        try:
            overrides["refine"] = tuple(int(v) for v in args.refine.split(",") if v.strip())
        except ValueError as exc:
            raise ConfigError("refine", f"cannot parse {args.refine!r}") from exc
    steps = getattr(args, "steps", None)
    if steps is not None:
        if steps < 0:
            raise ConfigError("steps", "must be nonnegative")
        overrides["T"] = 0.0  # replaced by steps * dt once dt is known
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = from_mapping({}, overrides)
    if steps:
        cfg = cfg.replace(T=steps * cfg.dt)
    return cfg


def _table(columns, rows, out) -> None:
    print(",".join(columns), file=out)
    for r in rows:
        print(",".join(format_value(v) for v in r), file=out)


def _mesh_info(cfg, out) -> int:
    info = runner.mesh_info(cfg)
    cols = ("domain", "vertices", "triangles", "velocity_dofs", "pressure_dofs", "interface_dofs",
            "area_min", "area_max", "area_ratio")
    rows = []
    for name, d in info.items():
        rows.append((name, d["vertices"], d["triangles"], d["velocity_dofs"], d.get("pressure_dofs", 0),
                     d["interface_dofs"], d["area_min"], d["area_max"], d["area_min"] / d["area_max"]))
    _table(cols, rows, out)
    return EXIT_OK


def _converge(cfg, out) -> int:
    reports = runner.converge(cfg)
    _table(("L", "dt", "e_u", "e_eta", "e_xi", "e_E"), [r for rep in reports for r in rep.rows()], out)
    print(file=out)
    _table(("L", "norm", "slope"),
           [(rep.L, n, s) for rep in reports for n, s in rep.slopes.items()], out)
    return EXIT_OK


def _stability_summary(cfg, ledger, out) -> int:
    last = ledger.rows[-1]
    if ledger.passed is None:
        verdict = "N/A (forced data)" if cfg.problem == "manufactured" and cfg.mode == "run" else "N/A (L1 != L2)"
    else:
        verdict = "PASS" if ledger.passed else "FAIL"
    _table(("steps", "E0_plus_I0", "final_running_sum", "final_E", "max_interface_defect", "inequality"),
           [(last.step, last.bound_E0_plus_I0, last.running_sum, last.E, ledger.max_interface_defect,
             verdict)], out)
    return EXIT_CHECK_FAILED if ledger.passed is False else EXIT_OK


def _stability(cfg, out) -> int:
    res = runner.stability(cfg)
    return _stability_summary(cfg, res.ledger, out)


def _run(cfg, out) -> int:
    res = runner.run(cfg)
    code = _stability_summary(cfg, res.ledger, out)
    if res.errors is not None:
        print(file=out)
        _table(("t",) + tuple(res.errors), [(res.state.t,) + tuple(res.errors.values())], out)
    return code


def _ale_demo(cfg, out) -> int:
    res = runner.ale_demo(cfg)
    tau = res.motion.tau_m
    _table(("triangles", "tau_min", "tau_max", "min_signed_area", "worst_aspect_ratio"),
           [(res.tri.n_triangles, float(tau.min()), float(tau.max()), res.min_area, res.worst_aspect)], out)
    return EXIT_OK


_DISPATCH = {"mesh-info": _mesh_info, "converge": _converge, "stability": _stability, "run": _run,
             "ale-demo": _ale_demo}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return _DISPATCH[cfg.mode](cfg, out)
    except (ConfigError, ParameterError, GeometryError, OutputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, StepError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
