"""Time loop of the parallel Robin-Robin splitting and the discrete energy ledger."""

from __future__ import annotations

import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coupling import (
    TractionLedger,
    interface_identity_defect,
    robin_rhs_fluid,
    robin_rhs_structure,
    update_tractions,
)
from .fem import Field, NormKind, norm
from .fluid import FluidStepSystem, fluid_step
from .mesh import CoupledMesh
from .structure import StructureStepSystem, structure_step

STABILITY_SLACK = 1e-8


class StepError(RuntimeError):
    """A sub-solver failed; ``subproblem`` is ``"fluid"`` or ``"structure"``."""

    def __init__(self, subproblem: str, cause: BaseException):
        super().__init__(f"{subproblem} subproblem failed: {cause}")
        self.subproblem = subproblem
        self.__cause__ = cause


@dataclass(frozen=True)
class Forcing:
    """Volume data evaluated at the new time level; ``None`` means zero."""

    fluid_body_force: Optional[Callable] = None
    mass_source: Optional[Callable] = None
    structure_body_force: Optional[Callable] = None


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet velocities on the external boundaries; ``None`` means homogeneous."""

    fluid_velocity: Optional[Callable] = None
    structure_velocity: Optional[Callable] = None


@dataclass(frozen=True)
class StepTiming:
    fluid: float = 0.0
    structure: float = 0.0
    wall: float = 0.0


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SimState:
    n: int
    dt: float
    u: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    ledger: TractionLedger
    fluid: FluidStepSystem = field(repr=False)
    structure: StructureStepSystem = field(repr=False)
    timing: StepTiming = field(default_factory=StepTiming, repr=False)

    def __post_init__(self):
        for name in ("u", "p", "eta", "xi"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def t(self) -> float:
        return self.n * self.dt


@dataclass(frozen=True)
class Parameters:
    rho_f: float = 1.0
    mu_f: float = 1.0
    rho_s: float = 1.0
    mu_s: float = 1.0
    lambda_s: float = 1.0
    L1: float = 1.0
    L2: float = 1.0


def build_systems(mesh: CoupledMesh, params: Parameters, dt: float, structure_dirichlet_tags=None):
    fluid = FluidStepSystem(mesh.fluid, params.rho_f, params.mu_f, params.L1, dt)
    kwargs = {} if structure_dirichlet_tags is None else {"dirichlet_tags": structure_dirichlet_tags}
    structure = StructureStepSystem(mesh.structure, params.rho_s, params.mu_s, params.lambda_s,
                                    params.L2, dt, **kwargs)
    if not np.array_equal(fluid.trace.coords, structure.trace.coords):
        raise ValueError("fluid and structure interface traces are not conforming")
    return fluid, structure


def initial_state(fluid: FluidStepSystem, structure: StructureStepSystem, u0=None, p0=None,
                  eta0=None, xi0=None, F0=None, S0=None) -> SimState:
    """Step-0 state; missing pieces are zero."""

    def vec(v, n):
        return np.zeros(n) if v is None else np.asarray(getattr(v, "values", v), dtype=float)

    u = vec(u0, fluid.V.ndofs)
    xi = vec(xi0, structure.V.ndofs)
    nt = fluid.trace.ndofs
    ledger = TractionLedger(
        F=vec(F0, nt), S=vec(S0, nt),
        u_trace=fluid.trace.restrict(u), xi_trace=structure.trace.restrict(xi),
    )
    return SimState(0, fluid.dt, u, vec(p0, fluid.Q.ndofs), vec(eta0, structure.V.ndofs), xi,
                    ledger, fluid, structure)


def _fluid_task(state: SimState, forcing: Forcing, boundary: BoundaryData, t: float):
    start = time.perf_counter()
    r_f = robin_rhs_fluid(state.ledger, state.fluid.L1)
    u, p = fluid_step(state.fluid, state.u, r_f, forcing.fluid_body_force, forcing.mass_source,
                      boundary.fluid_velocity, t)
    return u, p, time.perf_counter() - start


def _structure_task(state: SimState, forcing: Forcing, boundary: BoundaryData, t: float):
    start = time.perf_counter()
    r_s = robin_rhs_structure(state.ledger, state.structure.L2)
    xi, eta = structure_step(state.structure, state.eta, state.xi, r_s, forcing.structure_body_force,
                             boundary.structure_velocity, t)
    return xi, eta, time.perf_counter() - start


def _run(name, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # surfaced with the failing subproblem's name
        raise StepError(name, exc) from exc


def advance_step(state: SimState, forcing: Forcing = Forcing(), boundary: BoundaryData = BoundaryData(),
                 executor: Executor | None = None, order: str = "fluid-first") -> SimState:
    """One step of the splitting.

    Both subproblems read only step-n data.  With an ``executor`` they run as
    two concurrent tasks; otherwise sequentially in the given ``order``
    (``"fluid-first"`` or ``"structure-first"``).  The traction update happens
    after both have finished.
    """
    t_next = (state.n + 1) * state.dt
    wall = time.perf_counter()
    if executor is not None:
        fut_f = executor.submit(_run, "fluid", _fluid_task, state, forcing, boundary, t_next)
        fut_s = executor.submit(_run, "structure", _structure_task, state, forcing, boundary, t_next)
        (u, p, tf), (xi, eta, ts) = fut_f.result(), fut_s.result()
    elif order == "structure-first":
        xi, eta, ts = _run("structure", _structure_task, state, forcing, boundary, t_next)
        u, p, tf = _run("fluid", _fluid_task, state, forcing, boundary, t_next)
    elif order == "fluid-first":
        u, p, tf = _run("fluid", _fluid_task, state, forcing, boundary, t_next)
        xi, eta, ts = _run("structure", _structure_task, state, forcing, boundary, t_next)
    else:
        raise ValueError(f"unknown order {order!r}")
    wall = time.perf_counter() - wall

    ledger = update_tractions(
        state.ledger,
        state.fluid.trace.restrict(u.values),
        state.structure.trace.restrict(xi.values),
        state.fluid.L1,
        state.structure.L2,
    )
    return SimState(state.n + 1, state.dt, u.values, p.values, eta.values, xi.values, ledger,
                    state.fluid, state.structure, StepTiming(tf, ts, wall))


@dataclass(frozen=True)
class EnergyRow:
    step: int
    t: float
    E: float
    D: float
    I: float
    running_sum: float
    bound_E0_plus_I0: float
    u_minus_xi_gamma_norm: float
    F_gamma_norm: float
    S_gamma_norm: float

    COLUMNS = ("step", "t", "E", "D", "I", "running_sum", "bound_E0_plus_I0",
               "u_minus_xi_gamma_norm", "F_gamma_norm", "S_gamma_norm")

    def as_tuple(self):
        return tuple(getattr(self, c) for c in self.COLUMNS)


def _trace_norm(trace, v) -> float:
    return float(np.sqrt(max(float(v @ (trace.mass() @ v)), 0.0)))


def energy_terms(state: SimState, prev: SimState | None):
    """``(E, D, I)`` of the discrete stability estimate at ``state``."""
    fl, st = state.fluid, state.structure
    f = Field
    E = (0.5 * fl.rho_f * norm(f(fl.V, state.u)) ** 2
         + 0.5 * st.rho_s * norm(f(st.V, state.xi)) ** 2
         + 0.5 * _energy_sq(st, state.eta))
    if prev is None:
        D = 0.0
    else:
        D = (fl.mu_f * state.dt * norm(f(fl.V, state.u), NormKind.SEMINORM_D) ** 2
             + 0.5 * st.rho_s * norm(f(st.V, state.xi - prev.xi)) ** 2
             + 0.5 * _energy_sq(st, state.eta - prev.eta)
             + 0.5 * fl.rho_f * norm(f(fl.V, state.u - prev.u)) ** 2)
    tr = fl.trace
    led = state.ledger
    dt = state.dt
    I = (0.5 * fl.L1 * dt * _trace_norm(tr, led.u_trace) ** 2
         + 0.5 * st.L2 * dt * _trace_norm(tr, led.xi_trace) ** 2
         + 0.5 * dt / fl.L1 * _trace_norm(tr, led.F) ** 2
         + 0.5 * dt / st.L2 * _trace_norm(tr, led.S) ** 2)  # |sigma_s n_s| == |S|
    return E, D, I


def _energy_sq(st: StructureStepSystem, v) -> float:
    return max(float(v @ (st.K @ v)), 0.0)


class EnergyLedger:
    """Per-step energy quantities and the running stability check."""

    def __init__(self, check_inequality: bool = True, slack: float = STABILITY_SLACK):
        self.rows: list[EnergyRow] = []
        self.check_inequality = check_inequality
        self.slack = slack
        self._dissipation = 0.0
        self._bound = None
        self._last_sum = None
        self.max_interface_defect = 0.0
        self.violations: list[int] = []
        self.monotonicity_violations: list[int] = []

    def record(self, state: SimState, prev: SimState | None = None) -> EnergyRow:
        E, D, I = energy_terms(state, prev)
        if prev is None:
            self._dissipation = 0.0
            self._bound = E + I
            self._last_sum = None
        else:
            if self._bound is None:  # first row has a predecessor: bound from its energy
                E0, _, I0 = energy_terms(prev, None)
                self._bound = E0 + I0
            self._dissipation += D
            L1, L2 = state.fluid.L1, state.structure.L2
            if L1 == L2:
                self.max_interface_defect = max(self.max_interface_defect,
                                                interface_identity_defect(prev.ledger, state.ledger, L1))
        running = E + self._dissipation + I
        tr = state.fluid.trace
        led = state.ledger
        row = EnergyRow(state.n, state.t, E, D, I, running, self._bound,
                        _trace_norm(tr, led.u_trace - led.xi_trace),
                        _trace_norm(tr, led.F), _trace_norm(tr, led.S))
        slack = self.slack * (self._bound + 1.0)
        if self.check_inequality and running > self._bound + slack:
            self.violations.append(state.n)
        if self.check_inequality and self._last_sum is not None and running > self._last_sum + slack:
            self.monotonicity_violations.append(state.n)
        self._last_sum = running
        self.rows.append(row)
        return row

    @property
    def passed(self) -> bool | None:
        if not self.check_inequality:
            return None
        return not self.violations and not self.monotonicity_violations


def record_energy(state: SimState, prev: SimState | None = None) -> EnergyRow:
    """Stand-alone evaluation of one ledger row (running sums start at ``state``)."""
    ledger = EnergyLedger(check_inequality=False)
    return ledger.record(state, prev)


def run_steps(state: SimState, steps: int, forcing: Forcing = Forcing(),
              boundary: BoundaryData = BoundaryData(), parallel: bool = True,
              ledger: EnergyLedger | None = None, callback=None):
    """Advance ``steps`` times, recording every state in ``ledger`` (created if absent)."""
    if ledger is None:
        ledger = EnergyLedger(check_inequality=state.fluid.L1 == state.structure.L2)
    if not ledger.rows:
        ledger.record(state)
    timings = []
    pool = ThreadPoolExecutor(max_workers=2, thread_name_prefix="subproblem") if parallel else None
    try:
        for _ in range(steps):
            new = advance_step(state, forcing, boundary, executor=pool)
            ledger.record(new, state)
            timings.append(new.timing)
            if callback is not None:
                callback(new)
            state = new
    finally:
        if pool is not None:
            pool.shutdown()
    return state, ledger, timings
