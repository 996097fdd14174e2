"""Backward-Euler Stokes step with a Robin interface condition."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fem import FESpace, Field, ParameterError, TraceSpace, assemble, evaluate_at, load_vector
from .mesh import Tag, Triangulation
from .sparse import DirichletLift, SparseSystem

FLUID_DIRICHLET_TAGS = (Tag.INLET, Tag.OUTLET, Tag.WALL)


class FluidStepSystem:
    """Constant saddle-point operator of one fluid step, factorised once.

    Unknowns are ordered ``[u (P2 vector), p (P1)]``.  The momentum block is
    ``rho_f/dt M + 2 mu_f (D u, D v) + L1 <u, v>_interface``; the pressure
    carries no mean constraint since the interface traction fixes its level.
    """

    def __init__(self, tri: Triangulation, rho_f: float, mu_f: float, L1: float, dt: float,
                 dirichlet_tags=FLUID_DIRICHLET_TAGS):
        for name, val in (("rho_f", rho_f), ("mu_f", mu_f), ("L1", L1), ("dt", dt)):
            if not val > 0:
                raise ParameterError(f"{name} must be positive, got {val}")
        self.rho_f, self.mu_f, self.L1, self.dt = float(rho_f), float(mu_f), float(L1), float(dt)
        self.V = FESpace(tri, 2, 2)
        self.Q = FESpace(tri, 1, 1)
        self.trace = TraceSpace(self.V)
        self.M = assemble("MASS", self.V)
        self.viscous = assemble("VISCOUS", self.V, mu_f=self.mu_f)
        self.B = assemble("DIVERGENCE", self.V, self.Q)
        self.interface_mass = assemble("INTERFACE_MASS", self.V)
        self.A = (self.rho_f / self.dt * self.M + self.viscous + self.L1 * self.interface_mass).tocsr()
        self.K = sp.bmat([[self.A, -self.B.T], [-self.B, None]], format="csr")
        self.nu = self.V.ndofs
        self.np = self.Q.ndofs
        self.dirichlet_nodes = self.V.boundary_nodes(*dirichlet_tags)
        self.dirichlet_dofs = self.V.dofs_of_nodes(self.dirichlet_nodes)
        self.lift = DirichletLift(self.K, self.dirichlet_dofs)
        self.system = SparseSystem(self.lift.matrix).factor()

    def rhs(self, u_prev, robin_rhs, body_force=None, mass_source=None, t: float = 0.0) -> np.ndarray:
        b_u = self.rho_f / self.dt * (self.M @ u_prev)
        b_u += self.trace.extend(self.trace.mass() @ robin_rhs)
        if body_force is not None:
            b_u += load_vector(self.V, body_force, t)
        b_p = np.zeros(self.np)
        if mass_source is not None:
            b_p -= load_vector(self.Q, mass_source, t)
        return np.concatenate([b_u, b_p])

    def dirichlet_values(self, data, t: float) -> np.ndarray:
        if data is None:
            return np.zeros(self.dirichlet_dofs.size)
        X = self.V.node_coords[self.dirichlet_nodes]
        vals = evaluate_at(data, X, t, 2)
        return vals.reshape(-1)


def fluid_step(system: FluidStepSystem, u_prev, robin_rhs, body_force=None, mass_source=None,
               dirichlet=None, t: float = 0.0):
    """Advance the fluid by one step; data are evaluated at the new time ``t``.

    Returns ``(u_next, p_next)`` as fields on the velocity and pressure spaces.
    """
    u_prev = _values(u_prev, system.V)
    robin_rhs = np.asarray(robin_rhs, dtype=float)
    if robin_rhs.shape != (system.trace.ndofs,):
        raise ParameterError(f"robin datum has shape {robin_rhs.shape}, expected ({system.trace.ndofs},)")
    b = system.rhs(u_prev, robin_rhs, body_force, mass_source, t)
    b = system.lift.apply(b, system.dirichlet_values(dirichlet, t))
    x = system.system.solve(b)
    return Field(system.V, x[: system.nu]), Field(system.Q, x[system.nu:])


def _values(field, space) -> np.ndarray:
    if isinstance(field, Field):
        if field.space is not space:
            raise ParameterError(f"field lives on {field.space}, expected {space}")
        return field.values
    arr = np.asarray(field, dtype=float)
    if arr.shape != (space.ndofs,):
        raise ParameterError(f"vector of shape {arr.shape} does not match {space}")
    return arr
