"""Dirichlet elimination and a factor-once direct solver."""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import ParameterError

RESIDUAL_TOL = 1e-9


class SolverError(RuntimeError):
    """Raised when a linear system cannot be solved to tolerance."""

    def __init__(self, message: str, dof: int | None = None):
        super().__init__(message)
        self.dof = dof


def impose_dirichlet(A, dofs, values, rhs):
    """Symmetric elimination of prescribed dofs.

    Constrained rows and columns are replaced by the identity and the known
    column contributions moved to the right-hand side.
    Returns ``(A_constrained, rhs_constrained)``; inputs are not modified.
    """
    A = sp.csr_matrix(A, dtype=float)
    rhs = np.array(rhs, dtype=float)
    n = A.shape[0]
    dofs = np.asarray(dofs, dtype=np.int64).reshape(-1)
    if dofs.size == 0:
        return A.copy(), rhs
    if dofs.min() < 0 or dofs.max() >= n:
        raise ParameterError(f"Dirichlet dof out of range [0, {n})")
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
    lift = DirichletLift(A, dofs)
    return lift.matrix, lift.apply(rhs, values)


class DirichletLift:
    """Precomputed symmetric elimination for a fixed matrix and dof set.

    ``apply`` turns a raw right-hand side into the constrained one for any
    prescribed values; the constrained matrix never changes.
    """

    def __init__(self, A, dofs):
        A = sp.csr_matrix(A, dtype=float)
        n = A.shape[0]
        # caller's order is kept: ``apply`` pairs values with dofs positionally
        self.dofs = np.asarray(dofs, dtype=np.int64).reshape(-1)
        if np.unique(self.dofs).size != self.dofs.size:
            raise ParameterError("duplicate Dirichlet dofs")
        mask = np.zeros(n, dtype=bool)
        mask[self.dofs] = True
        keep = sp.diags((~mask).astype(float))
        self.columns = (A[:, self.dofs]).tocsr()
        self.columns = (keep @ self.columns).tocsr()
        Ac = keep @ A @ keep + sp.diags(mask.astype(float))
        Ac = sp.csr_matrix(Ac)
        Ac.eliminate_zeros()
        Ac.sort_indices()
        self.matrix = Ac

    def apply(self, rhs, values) -> np.ndarray:
        b = np.array(rhs, dtype=float)
        if self.dofs.size == 0:
            return b
        values = np.broadcast_to(np.asarray(values, dtype=float), self.dofs.shape)
        b -= self.columns @ values
        b[self.dofs] = values
        return b


def _find_zero_pivot(A: sp.spmatrix) -> int | None:
    A = sp.csr_matrix(A)
    empty_rows = np.flatnonzero(np.diff(A.indptr) == 0)
    if empty_rows.size:
        return int(empty_rows[0])
    empty_cols = np.flatnonzero(np.diff(A.tocsc().indptr) == 0)
    if empty_cols.size:
        return int(empty_cols[0])
    if A.shape[0] <= 4000:
        _, _, U = scipy.linalg.lu(A.toarray())
        scale = max(np.abs(np.diag(U)).max(), 1.0)
        small = np.flatnonzero(np.abs(np.diag(U)) <= 1e-14 * scale)
        if small.size:
            return int(small[0])
    return None


class SparseSystem:
    """Sparse matrix with a cached LU factorisation.

    The matrix is stored read-only; use :meth:`with_matrix` to obtain a new
    system (and so a fresh factorisation) for a different operator.
    """

    def __init__(self, A, check_residual: bool = True):
        A = sp.csr_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ParameterError(f"matrix must be square, got {A.shape}")
        for arr in (A.data, A.indices, A.indptr):
            arr.setflags(write=False)
        self._A = A
        self._lu = None
        self.check_residual = check_residual

    @property
    def matrix(self) -> sp.csr_matrix:
        return self._A

    @property
    def factorized(self) -> bool:
        return self._lu is not None

    def with_matrix(self, A) -> "SparseSystem":
        return SparseSystem(A, self.check_residual)

    def factor(self) -> "SparseSystem":
        if self._lu is None:
            try:
                self._lu = spla.splu(self._A.tocsc())
            except RuntimeError as exc:
                dof = _find_zero_pivot(self._A)
                where = f" (zero pivot at dof {dof})" if dof is not None else ""
                raise SolverError(f"singular matrix{where}: {exc}", dof) from exc
        return self

    def solve(self, rhs) -> np.ndarray:
        self.factor()
        b = np.asarray(rhs, dtype=float)
        x = self._lu.solve(b)
        if self.check_residual:
            res = np.max(np.abs(self._A @ x - b)) if b.size else 0.0
            scale = max(1.0, float(np.max(np.abs(b))) if b.size else 0.0)
            if not np.isfinite(res) or res / scale > RESIDUAL_TOL:
                raise SolverError(f"scaled residual {res / scale:.3e} exceeds {RESIDUAL_TOL:g}")
        return x

    def dump(self, path) -> None:
        """Write the matrix in Matrix Market coordinate format."""
        scipy.io.mmwrite(str(path), self._A)


def factor_and_solve(system: SparseSystem, rhs) -> np.ndarray:
    if not isinstance(system, SparseSystem):
        system = SparseSystem(system)
    return system.solve(rhs)
