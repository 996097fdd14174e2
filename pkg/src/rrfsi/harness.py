"""Manufactured-solution verification and energy-stability studies."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .fem import FESpace, Field, NormKind, ParameterError, error_norm, interpolate
from .mesh import Rect, build_layered_rect_mesh
from .orchestrator import (
    BoundaryData,
    EnergyLedger,
    Forcing,
    Parameters,
    build_systems,
    initial_state,
    run_steps,
)

FLUID_RECT = Rect(0.0, 1.0, 0.0, 1.0)
STRUCTURE_RECT = Rect(0.0, 1.0, -1.0, 0.0)
INTERFACE_NORMAL = (0.0, -1.0)  # fluid outward normal on y = 0

_x, _y, _t = sp.symbols("x y t", real=True)


def _grad(v: sp.Matrix) -> sp.Matrix:
    return sp.Matrix(2, 2, lambda i, j: sp.diff(v[i], (_x, _y)[j]))


def _div_vec(v: sp.Matrix):
    return sp.diff(v[0], _x) + sp.diff(v[1], _y)


def _div_tensor(s: sp.Matrix) -> sp.Matrix:
    return sp.Matrix([sp.diff(s[i, 0], _x) + sp.diff(s[i, 1], _y) for i in range(2)])


def _vector_fn(expr: sp.Matrix):
    f = sp.lambdify((_x, _y, _t), list(expr), "numpy")

    def evaluate(x, y, t):
        x = np.asarray(x, dtype=float)
        return [np.broadcast_to(np.asarray(c, dtype=float), x.shape) for c in f(x, y, t)]

    return evaluate


def _tensor_fn(expr: sp.Matrix):
    f = sp.lambdify((_x, _y, _t), [[expr[i, j] for j in range(2)] for i in range(2)], "numpy")

    def evaluate(x, y, t):
        x = np.asarray(x, dtype=float)
        return [[np.broadcast_to(np.asarray(c, dtype=float), x.shape) for c in row] for row in f(x, y, t)]

    return evaluate


def _scalar_fn(expr):
    f = sp.lambdify((_x, _y, _t), expr, "numpy")

    def evaluate(x, y, t):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(f(x, y, t), dtype=float), x.shape)

    return evaluate


class ManufacturedCase:
    """Closed-form solution of the linearised coupled problem with derived forcings.

    Fields: displacement ``eta``, structure velocity ``xi = d eta/dt``, fluid
    velocity ``u`` (equal to ``xi``) and a spatially constant pressure.  The
    fluid velocity is not solenoidal, so a mass source ``f_m = div u`` is
    supplied.  Forcings are obtained by symbolic differentiation.
    """

    def __init__(self, rho_f=1.0, mu_f=1.0, rho_s=1.0, mu_s=1.0, lambda_s=1.0):
        self.params = dict(rho_f=rho_f, mu_f=mu_f, rho_s=rho_s, mu_s=mu_s, lambda_s=lambda_s)
        x, y, t, pi = _x, _y, _t, sp.pi
        shape = sp.Matrix([sp.cos(y) - 3 * x, y + 1])
        self.eta_expr = sp.sin(pi * t) * shape
        self.xi_expr = sp.diff(self.eta_expr, t)
        self.u_expr = pi * sp.cos(pi * t) * shape
        self.p_expr = 2 * pi * sp.cos(pi * t)

        eye = sp.eye(2)
        gu, ge = _grad(self.u_expr), _grad(self.eta_expr)
        self.sigma_f_expr = mu_f * (gu + gu.T) - self.p_expr * eye
        self.sigma_s_expr = mu_s * (ge + ge.T) + lambda_s * _div_vec(self.eta_expr) * eye
        self.f_f_expr = sp.simplify(rho_f * sp.diff(self.u_expr, t) - _div_tensor(self.sigma_f_expr))
        self.f_m_expr = sp.simplify(_div_vec(self.u_expr))
        self.g_s_expr = sp.simplify(rho_s * sp.diff(self.xi_expr, t) - _div_tensor(self.sigma_s_expr))

        self.u = _vector_fn(self.u_expr)
        self.xi = _vector_fn(self.xi_expr)
        self.eta = _vector_fn(self.eta_expr)
        self.p = _scalar_fn(self.p_expr)
        self.grad_eta = _tensor_fn(ge)
        self.sigma_f = _tensor_fn(self.sigma_f_expr)
        self.sigma_s = _tensor_fn(self.sigma_s_expr)
        self.fluid_body_force = _vector_fn(self.f_f_expr)
        self.mass_source = _scalar_fn(self.f_m_expr)
        self.structure_body_force = _vector_fn(self.g_s_expr)

        n = sp.Matrix(INTERFACE_NORMAL)
        self.interface_tractions_vanish = all(
            sp.simplify(c.subs(y, 0)) == 0
            for c in list(self.sigma_f_expr * n) + list(self.sigma_s_expr * n))
        if not self.interface_tractions_vanish:
            warnings.warn("manufactured interface tractions are nonzero for these parameters; "
                          "exact traction seeds are used", stacklevel=2)

    def traction(self, which: str, x, y, t):
        """``sigma n_f`` of the fluid (``"F"``) or structure (``"S"``) at points."""
        sig = (self.sigma_f if which == "F" else self.sigma_s)(x, y, t)
        n = INTERFACE_NORMAL
        return [sig[i][0] * n[0] + sig[i][1] * n[1] for i in range(2)]

    def forcing(self) -> Forcing:
        return Forcing(self.fluid_body_force, self.mass_source, self.structure_body_force)

    def boundary(self) -> BoundaryData:
        return BoundaryData(self.u, self.xi)


def forcing_terms(case: ManufacturedCase, point, t: float):
    """``(f_f, f_m, g_s)`` at one point from the symbolic derivation."""
    x, y = (np.array(float(c)) for c in point)
    f_f = np.array([float(c) for c in case.fluid_body_force(x, y, t)])
    g_s = np.array([float(c) for c in case.structure_body_force(x, y, t)])
    return f_f, float(case.mass_source(x, y, t)), g_s


def _d(f, i: int, h: float):
    """Fourth-order central difference of ``f(z)`` along coordinate ``i`` of ``z = (x, y, t)``."""

    def df(z):
        e = np.zeros(3)
        e[i] = h
        return (-f(z + 2 * e) + 8 * f(z + e) - 8 * f(z - e) + f(z - 2 * e)) / (12.0 * h)

    return df


def forcing_terms_fd(case: ManufacturedCase, point, t: float, h: float = 1e-3):
    """Finite-difference forcing oracle built only from the displacement, velocity and pressure."""
    P = case.params

    def comp(fn, c):
        return lambda z: float(fn(z[0], z[1], z[2])[c])

    u = [comp(case.u, c) for c in range(2)]
    eta = [comp(case.eta, c) for c in range(2)]
    p = lambda z: float(case.p(z[0], z[1], z[2]))  # noqa: E731
    xi = [_d(eta[c], 2, h) for c in range(2)]

    def sigma(v, mu, pressure=None, lam=None):
        def entry(i, j):
            def s(z):
                val = mu * (_d(v[i], j, h)(z) + _d(v[j], i, h)(z))
                if i == j and pressure is not None:
                    val -= pressure(z)
                if i == j and lam is not None:
                    val += lam * (_d(v[0], 0, h)(z) + _d(v[1], 1, h)(z))
                return val
            return s
        return [[entry(i, j) for j in range(2)] for i in range(2)]

    sf = sigma(u, P["mu_f"], pressure=p)
    ss = sigma(eta, P["mu_s"], lam=P["lambda_s"])
    z = np.array([float(point[0]), float(point[1]), float(t)])
    div = lambda s, i: _d(s[i][0], 0, h)(z) + _d(s[i][1], 1, h)(z)  # noqa: E731
    f_f = np.array([P["rho_f"] * _d(u[i], 2, h)(z) - div(sf, i) for i in range(2)])
    f_m = _d(u[0], 0, h)(z) + _d(u[1], 1, h)(z)
    g_s = np.array([P["rho_s"] * _d(xi[i], 2, h)(z) - div(ss, i) for i in range(2)])
    return f_f, f_m, g_s


# ---------------------------------------------------------------- convergence


ERROR_NAMES = ("e_u", "e_eta", "e_xi", "e_E")


@dataclass
class ErrorReport:
    L: float
    dts: list
    errors: dict = field(default_factory=dict)  # name -> list aligned with dts
    slopes: dict = field(default_factory=dict)

    def rows(self):
        for k, dt in enumerate(self.dts):
            yield (self.L, dt) + tuple(self.errors[n][k] for n in ERROR_NAMES)


def fit_slope(dts, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(dt)``; NaN when undefined."""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dts.size < 2 or np.ptp(np.log(dts)) == 0.0:
        warnings.warn("time step sweep is degenerate; slope undefined", stacklevel=2)
        return math.nan
    if np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        warnings.warn("non-positive or non-finite errors; slope undefined", stacklevel=2)
        return math.nan
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


def steps_for(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 0 or abs(n * dt - T) > 1e-9 * max(abs(T), 1.0):
        raise ParameterError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def manufactured_initial_state(case: ManufacturedCase, fluid, structure):
    """Exact fields and exact interface tractions at ``t = 0``."""
    tr = fluid.trace
    if not np.allclose(tr.coords[:, 1], 0.0, atol=1e-12):
        raise ParameterError("the manufactured solution needs the interface on y = 0")
    return initial_state(
        fluid, structure,
        u0=interpolate(case.u, fluid.V, 0.0),
        p0=interpolate(case.p, fluid.Q, 0.0),
        eta0=interpolate(case.eta, structure.V, 0.0),
        xi0=interpolate(case.xi, structure.V, 0.0),
        F0=interpolate(lambda x, y, t: case.traction("F", x, y, t), tr, 0.0),
        S0=interpolate(lambda x, y, t: case.traction("S", x, y, t), tr, 0.0),
    )


def manufactured_run(nx: int, dt: float, L: float, T: float, case: ManufacturedCase | None = None,
                     parallel: bool = False, ny: int | None = None, return_state: bool = False):
    """Run the splitting against the manufactured solution and return the final errors."""
    case = case or ManufacturedCase()
    steps = steps_for(T, dt)
    mesh = build_layered_rect_mesh(FLUID_RECT, STRUCTURE_RECT, nx, ny or nx)
    params = Parameters(L1=L, L2=L, **case.params)
    fluid, structure = build_systems(mesh, params, dt)
    state = manufactured_initial_state(case, fluid, structure)
    ledger = EnergyLedger(check_inequality=False)
    state, ledger, _ = run_steps(state, steps, case.forcing(), case.boundary(), parallel=parallel,
                                 ledger=ledger)
    errors = final_errors(state, case, fluid.V, structure.V)
    if return_state:
        return errors, state, ledger
    return errors


def final_errors(state, case: ManufacturedCase, V_f: FESpace, V_s: FESpace) -> dict:
    t = state.t
    mu, lam = case.params["mu_s"], case.params["lambda_s"]
    eta = Field(V_s, state.eta)
    return {
        "e_u": error_norm(Field(V_f, state.u), case.u, t),
        "e_eta": error_norm(eta, case.eta, t),
        "e_xi": error_norm(Field(V_s, state.xi), case.xi, t),
        "e_E": error_norm(eta, case.eta, t, NormKind.ENERGY, exact_grad=case.grad_eta,
                          mu_s=mu, lambda_s=lam),
    }


def convergence_study(nx: int, dt_list, L: float = 1.0, T_final: float = 0.5,
                      case: ManufacturedCase | None = None, parallel: bool = False,
                      ny: int | None = None) -> ErrorReport:
    """Errors at ``T_final`` for each time step and fitted log-log slopes."""
    dts = [float(d) for d in dt_list]
    if any(b > a for a, b in zip(dts, dts[1:])):
        raise ParameterError("dt_list must be non-increasing")
    for d in dts:
        steps_for(T_final, d)
    case = case or ManufacturedCase()
    report = ErrorReport(L=float(L), dts=dts, errors={n: [] for n in ERROR_NAMES})
    cache = {}
    for d in dts:
        if d not in cache:
            cache[d] = manufactured_run(nx, d, L, T_final, case, parallel=parallel, ny=ny)
        for n in ERROR_NAMES:
            report.errors[n].append(cache[d][n])
    for n in ERROR_NAMES:
        report.slopes[n] = fit_slope(dts, report.errors[n])
    return report


# ------------------------------------------------------------------ stability


def smooth_random_field(space: FESpace, rect: Rect, interface_y: float, rng: np.random.Generator,
                        modes: int = 3, amplitude: float = 1.0):
    """Random sine/cosine series vanishing on every side of ``rect`` except the interface.

    Mode ``(k, l)`` is ``sin(k pi r) cos((l - 1/2) pi s)`` with ``r`` the
    normalised coordinate along the interface and ``s`` the normalised
    distance from it; coefficients are standard normal scaled by ``1/(k^2+l^2)``.
    """
    coef = rng.standard_normal((2, modes, modes))
    X = space.node_coords
    r = (X[:, 0] - rect.x0) / (rect.x1 - rect.x0)
    s = np.abs(X[:, 1] - interface_y) / (rect.y1 - rect.y0)
    vals = np.zeros((len(X), 2))
    for k in range(1, modes + 1):
        for l in range(1, modes + 1):
            mode = np.sin(k * np.pi * r) * np.cos((l - 0.5) * np.pi * s) / (k * k + l * l)
            vals += mode[:, None] * coef[:, k - 1, l - 1][None, :]
    scale = np.abs(vals).max()
    if scale > 0:
        vals *= amplitude / scale
    return vals.reshape(-1)


def random_initial_state(fluid, structure, fluid_rect: Rect, structure_rect: Rect, seed: int = 0,
                         amplitude: float = 1.0):
    """Seeded smooth velocities (zero on Dirichlet dofs), zero displacement and tractions."""
    rng = np.random.default_rng(seed)
    y_gamma = float(fluid.trace.coords[0, 1])
    u0 = smooth_random_field(fluid.V, fluid_rect, y_gamma, rng, amplitude=amplitude)
    xi0 = smooth_random_field(structure.V, structure_rect, y_gamma, rng, amplitude=amplitude)
    u0[fluid.dirichlet_dofs] = 0.0
    xi0[structure.dirichlet_dofs] = 0.0
    return initial_state(fluid, structure, u0=u0, xi0=xi0)


@dataclass
class StabilityResult:
    ledger: EnergyLedger
    passed: bool | None
    state: object = None
    timings: list = field(default_factory=list)


def stability_study(nx: int, dt: float, L1: float, L2: float, steps: int, seed: int = 0,
                    parallel: bool = True, amplitude: float = 1.0, params: Parameters | None = None,
                    ny: int | None = None, fluid_rect: Rect = FLUID_RECT,
                    structure_rect: Rect = STRUCTURE_RECT) -> StabilityResult:
    """Unforced run with homogeneous Dirichlet data and seeded smooth initial velocities."""
    base = params or Parameters()
    params = Parameters(base.rho_f, base.mu_f, base.rho_s, base.mu_s, base.lambda_s, L1, L2)
    fluid_rect, structure_rect = Rect.from_seq(fluid_rect), Rect.from_seq(structure_rect)
    mesh = build_layered_rect_mesh(fluid_rect, structure_rect, nx, ny or nx)
    fluid, structure = build_systems(mesh, params, dt)
    state = random_initial_state(fluid, structure, fluid_rect, structure_rect, seed, amplitude)
    ledger = EnergyLedger(check_inequality=(L1 == L2))
    state, ledger, timings = run_steps(state, steps, parallel=parallel, ledger=ledger)
    return StabilityResult(ledger, ledger.passed, state, timings)
