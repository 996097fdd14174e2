"""Explicit interface state of the Robin-Robin splitting.

Both tractions are stored against the fluid normal: ``F = sigma_f n_f`` and
``S = sigma_s n_f``.  Every occurrence of the structure normal is therefore a
sign flip, and all of them live in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fem import ParameterError


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TractionLedger:
    """Interface traces at step n, all on the shared interface trace dofs."""

    F: np.ndarray
    S: np.ndarray
    u_trace: np.ndarray
    xi_trace: np.ndarray

    def __post_init__(self):
        shapes = set()
        for name in ("F", "S", "u_trace", "xi_trace"):
            arr = _frozen(getattr(self, name))
            object.__setattr__(self, name, arr)
            shapes.add(arr.shape)
        if len(shapes) != 1:
            raise ParameterError(f"ledger fields have mismatched shapes {sorted(shapes)}")

    @classmethod
    def zeros(cls, n: int) -> "TractionLedger":
        z = np.zeros(n)
        return cls(z, z, z, z)

    @property
    def size(self) -> int:
        return self.F.shape[0]


def robin_rhs_fluid(ledger: TractionLedger, L1: float) -> np.ndarray:
    """Datum of the fluid Robin condition ``L1 u + sigma_f n_f = r_f``."""
    return 0.5 * L1 * (ledger.u_trace + ledger.xi_trace) + 0.5 * (ledger.F + ledger.S)


def robin_rhs_structure(ledger: TractionLedger, L2: float) -> np.ndarray:
    """Datum of the structure Robin condition ``L2 xi + sigma_s n_s = r_s``."""
    return 0.5 * L2 * (ledger.u_trace + ledger.xi_trace) - 0.5 * (ledger.F + ledger.S)


def fluid_traction(ledger: TractionLedger, u_new, L1: float) -> np.ndarray:
    """``F^{n+1}``, read off the fluid Robin identity."""
    return robin_rhs_fluid(ledger, L1) - L1 * np.asarray(u_new)


def structure_traction(ledger: TractionLedger, xi_new, L2: float) -> np.ndarray:
    """``S^{n+1} = sigma_s^{n+1} n_f``; the identity gives ``sigma_s n_s = r_s - L2 xi``."""
    return L2 * np.asarray(xi_new) - robin_rhs_structure(ledger, L2)


def update_tractions(ledger: TractionLedger, u_new, xi_new, L1: float, L2: float) -> TractionLedger:
    """Ledger for step n+1 from the freshly solved interface traces."""
    u_new = np.asarray(u_new, dtype=float)
    xi_new = np.asarray(xi_new, dtype=float)
    if u_new.shape != ledger.F.shape or xi_new.shape != ledger.F.shape:
        raise ParameterError(
            f"trace shapes {u_new.shape}/{xi_new.shape} do not match ledger {ledger.F.shape}")
    return replace(
        ledger,
        F=fluid_traction(ledger, u_new, L1),
        S=structure_traction(ledger, xi_new, L2),
        u_trace=u_new,
        xi_trace=xi_new,
    )


def interface_identity_defect(old: TractionLedger, new: TractionLedger, L: float) -> float:
    """Max dof-wise defect of ``u - xi = ((F+S)_old - F_new - S_new) / L``."""
    lhs = new.u_trace - new.xi_trace
    rhs = ((old.F + old.S) - new.F - new.S) / L
    return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
