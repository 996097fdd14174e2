"""Backward-Euler linear elastodynamics step with a Robin interface condition."""

from __future__ import annotations

import numpy as np

from .fem import FESpace, Field, ParameterError, TraceSpace, assemble, evaluate_at, load_vector
from .fluid import _values
from .mesh import Tag, Triangulation
from .sparse import DirichletLift, SparseSystem

STRUCTURE_DIRICHLET_TAGS = (Tag.STRUCTURE_OUTER,)


class StructureStepSystem:
    """SPD velocity operator ``rho_s/dt M + dt K + L2 <xi, zeta>_interface``.

    The displacement is eliminated through ``eta_next = eta_prev + dt xi_next``,
    so only the velocity is solved for.  ``K`` is the elasticity operator.
    """

    def __init__(self, tri: Triangulation, rho_s: float, mu_s: float, lambda_s: float, L2: float,
                 dt: float, dirichlet_tags=STRUCTURE_DIRICHLET_TAGS):
        for name, val in (("rho_s", rho_s), ("mu_s", mu_s), ("lambda_s", lambda_s), ("L2", L2), ("dt", dt)):
            if not val > 0:
                raise ParameterError(f"{name} must be positive, got {val}")
        self.rho_s, self.mu_s, self.lambda_s = float(rho_s), float(mu_s), float(lambda_s)
        self.L2, self.dt = float(L2), float(dt)
        self.V = FESpace(tri, 2, 2)
        self.trace = TraceSpace(self.V)
        self.M = assemble("MASS", self.V)
        self.K = assemble("ELASTICITY", self.V, mu_s=self.mu_s, lambda_s=self.lambda_s)
        self.interface_mass = assemble("INTERFACE_MASS", self.V)
        self.A = (self.rho_s / self.dt * self.M + self.dt * self.K + self.L2 * self.interface_mass).tocsr()
        self.dirichlet_nodes = self.V.boundary_nodes(*dirichlet_tags)
        self.dirichlet_dofs = self.V.dofs_of_nodes(self.dirichlet_nodes)
        self.lift = DirichletLift(self.A, self.dirichlet_dofs)
        self.system = SparseSystem(self.lift.matrix).factor()

    def rhs(self, eta_prev, xi_prev, robin_rhs, body_force=None, t: float = 0.0) -> np.ndarray:
        b = self.rho_s / self.dt * (self.M @ xi_prev) - self.K @ eta_prev
        b += self.trace.extend(self.trace.mass() @ robin_rhs)
        if body_force is not None:
            b += load_vector(self.V, body_force, t)
        return b

    def dirichlet_values(self, data, t: float) -> np.ndarray:
        if data is None:
            return np.zeros(self.dirichlet_dofs.size)
        X = self.V.node_coords[self.dirichlet_nodes]
        return evaluate_at(data, X, t, 2).reshape(-1)


def structure_step(system: StructureStepSystem, eta_prev, xi_prev, robin_rhs, body_force=None,
                   dirichlet=None, t: float = 0.0):
    """Advance the structure by one step.

    ``dirichlet`` prescribes the velocity on the outer boundary at time ``t``.
    Returns ``(xi_next, eta_next)``.
    """
    eta_prev = _values(eta_prev, system.V)
    xi_prev = _values(xi_prev, system.V)
    robin_rhs = np.asarray(robin_rhs, dtype=float)
    if robin_rhs.shape != (system.trace.ndofs,):
        raise ParameterError(f"robin datum has shape {robin_rhs.shape}, expected ({system.trace.ndofs},)")
    b = system.rhs(eta_prev, xi_prev, robin_rhs, body_force, t)
    b = system.lift.apply(b, system.dirichlet_values(dirichlet, t))
    xi_next = system.system.solve(b)
    eta_next = eta_prev + system.dt * xi_next
    return Field(system.V, xi_next), Field(system.V, eta_next)
