"""Lagrange P1/P2 finite elements on triangles: spaces, traces, assembly and norms."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .mesh import Tag, Triangulation


class ParameterError(ValueError):
    """Raised for missing or incompatible parameters."""


class AssemblyError(ValueError):
    """Raised when trial and test spaces cannot be combined."""


# Degree-4 symmetric 6-point rule, barycentric points, weights sum to one.
_A1, _W1 = 0.445948490915964886318329253883, 0.223381589678011465944640403648
_A2, _W2 = 0.091576213509770743459571463402, 0.109951743655321867388692929685
TRI_POINTS = np.array([
    [_A1, _A1], [1 - 2 * _A1, _A1], [_A1, 1 - 2 * _A1],
    [_A2, _A2], [1 - 2 * _A2, _A2], [_A2, 1 - 2 * _A2],
])
TRI_WEIGHTS = np.array([_W1] * 3 + [_W2] * 3)

# 3-point Gauss-Legendre on [0, 1]
EDGE_POINTS = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])
EDGE_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def reference_basis(degree: int, pts: np.ndarray):
    """Basis values ``(nq, nb)`` and reference gradients ``(nq, nb, 2)``.

    Local node order: the three vertices, then midpoints of edges
    (0,1), (1,2), (2,0).
    """
    xi, eta = pts[:, 0], pts[:, 1]
    lam = np.stack([1.0 - xi - eta, xi, eta], axis=1)
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    nq = len(pts)
    if degree == 1:
        return lam, np.broadcast_to(dlam, (nq, 3, 2)).copy()
    if degree != 2:
        raise ParameterError(f"unsupported degree {degree}")
    N = np.empty((nq, 6))
    G = np.empty((nq, 6, 2))
    for i in range(3):
        N[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        G[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
    for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        N[:, 3 + k] = 4.0 * lam[:, i] * lam[:, j]
        G[:, 3 + k] = 4.0 * (lam[:, i][:, None] * dlam[j] + lam[:, j][:, None] * dlam[i])
    return N, G


def edge_basis(degree: int, s: np.ndarray) -> np.ndarray:
    """1D basis on an edge parametrised by s in [0, 1]; order (start, end, midpoint)."""
    if degree == 1:
        return np.stack([1.0 - s, s], axis=1)
    return np.stack([(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)], axis=1)


class FESpace:
    """Continuous Lagrange space of degree 1 or 2 with 1 or 2 components.

    Nodes are the mesh vertices followed (for P2) by edge midpoints; vector
    dofs are interleaved, ``dof = node * components + component``.
    """

    def __init__(self, tri: Triangulation, degree: int, components: int = 1):
        if degree not in (1, 2):
            raise ParameterError(f"degree must be 1 or 2, got {degree}")
        if components not in (1, 2):
            raise ParameterError(f"components must be 1 or 2, got {components}")
        self.tri = tri
        self.degree = degree
        self.components = components

        t = tri.triangles
        local = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges, inverse = np.unique(np.sort(local, axis=1), axis=0, return_inverse=True)
        self.edges = edges
        self._edge_index = {(int(p), int(q)): k for k, (p, q) in enumerate(edges)}
        nv, ne = tri.n_vertices, tri.n_triangles
        if degree == 1:
            self.cell_nodes = t.copy()
            self.node_coords = tri.vertices.copy()
        else:
            cell_edges = inverse.reshape(-1)[np.arange(3 * ne)].reshape(3, ne).T
            self.cell_nodes = np.concatenate([t, nv + cell_edges], axis=1)
            mid = 0.5 * (tri.vertices[edges[:, 0]] + tri.vertices[edges[:, 1]])
            self.node_coords = np.concatenate([tri.vertices, mid])
        self.n_nodes = len(self.node_coords)
        self.ndofs = self.n_nodes * components
        self.cell_dofs = self.dofs_of_nodes(self.cell_nodes.reshape(-1)).reshape(ne, -1)

        v0 = tri.vertices[t[:, 0]]
        J = np.stack([tri.vertices[t[:, 1]] - v0, tri.vertices[t[:, 2]] - v0], axis=2)
        self._J = J
        self.areas = 0.5 * (J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])
        self._Jinv = np.linalg.inv(J)
        self._cache = {}

    def dofs_of_nodes(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        c = self.components
        return (nodes[:, None] * c + np.arange(c)[None, :]).reshape(-1)

    def edge_node(self, p: int, q: int) -> int:
        """Node id of the midpoint of mesh edge (p, q); P2 only."""
        return self.tri.n_vertices + self._edge_index[(min(p, q), max(p, q))]

    def boundary_nodes(self, *tags) -> np.ndarray:
        """Sorted node ids lying on edges with any of the given tags."""
        out = []
        for tag in tags:
            edges = self.tri.edges_with_tag(tag)
            out.append(edges.reshape(-1))
            if self.degree == 2:
                out.append(np.array([self.edge_node(p, q) for p, q in edges], dtype=np.int64))
        if not out:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(out))

    def boundary_dofs(self, *tags) -> np.ndarray:
        return self.dofs_of_nodes(self.boundary_nodes(*tags))

    def quadrature(self, points=TRI_POINTS, weights=TRI_WEIGHTS):
        """Basis data at quadrature points of every cell.

        Returns ``(N, G, xq, wq)``: values ``(nq, nb)``, physical gradients
        ``(ne, nq, nb, 2)``, physical points ``(ne, nq, 2)`` and weights
        ``(ne, nq)`` including the cell area.
        """
        key = ("quad", id(points))
        if key not in self._cache:
            N, Gref = reference_basis(self.degree, points)
            G = np.einsum("qbk,ekj->eqbj", Gref, self._Jinv)
            v0 = self.tri.vertices[self.tri.triangles[:, 0]]
            xq = v0[:, None, :] + np.einsum("ejk,qk->eqj", self._J, points)
            wq = self.areas[:, None] * weights[None, :]
            self._cache[key] = (N, G, xq, wq)
        return self._cache[key]

    def __repr__(self):
        return f"FESpace(P{self.degree}, components={self.components}, ndofs={self.ndofs})"


class TraceSpace:
    """Restriction of a space to the boundary edges carrying one tag.

    Trace nodes are ordered along the (straight) boundary segment, so two
    conforming spaces on either side of an interface produce matching orders.
    """

    def __init__(self, space: FESpace, tag: Tag = Tag.INTERFACE):
        self.space = space
        self.components = space.components
        self.degree = space.degree
        edges = space.tri.edges_with_tag(tag)
        if len(edges) == 0:
            raise ParameterError(f"no edges tagged {tag}")
        per_edge = [list(e) + ([space.edge_node(*e)] if space.degree == 2 else []) for e in edges]
        per_edge = np.array(per_edge, dtype=np.int64)
        nodes = np.unique(per_edge)
        coords = space.node_coords[nodes]
        tangent = coords.max(axis=0) - coords.min(axis=0)
        order = np.argsort(coords @ tangent, kind="stable")
        self.nodes = nodes[order]
        self.coords = space.node_coords[self.nodes]
        lookup = {int(n): i for i, n in enumerate(self.nodes)}
        self.edge_nodes = np.vectorize(lookup.__getitem__)(per_edge)
        p, q = space.node_coords[edges[:, 0]], space.node_coords[edges[:, 1]]
        self.edge_lengths = np.linalg.norm(q - p, axis=1)
        self.n_nodes = len(self.nodes)
        self.ndofs = self.n_nodes * self.components
        self.volume_dofs = space.dofs_of_nodes(self.nodes)
        self._mass = None

    def dofs_of_nodes(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        c = self.components
        return (nodes[:, None] * c + np.arange(c)[None, :]).reshape(-1)

    def restrict(self, volume_values: np.ndarray) -> np.ndarray:
        return np.asarray(volume_values)[self.volume_dofs]

    def extend(self, trace_values: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`restrict`: scatter trace values into a zero volume vector."""
        out = np.zeros(self.space.ndofs)
        out[self.volume_dofs] = trace_values
        return out

    def restriction_matrix(self) -> sp.csr_matrix:
        n = self.ndofs
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.volume_dofs)), shape=(n, self.space.ndofs))

    def mass(self) -> sp.csr_matrix:
        """Boundary mass matrix on the trace dofs."""
        if self._mass is None:
            B = edge_basis(self.degree, EDGE_POINTS)
            local = np.einsum("q,e,qa,qb->eab", EDGE_WEIGHTS, self.edge_lengths, B, B)
            self._mass = _scatter(_blockify(local, self.components),
                                  self._edge_dofs(), self._edge_dofs(), (self.ndofs, self.ndofs))
        return self._mass

    def _edge_dofs(self) -> np.ndarray:
        return self.dofs_of_nodes(self.edge_nodes.reshape(-1)).reshape(len(self.edge_nodes), -1)

    def __repr__(self):
        return f"TraceSpace(P{self.degree}, components={self.components}, ndofs={self.ndofs})"


@dataclass(frozen=True, eq=False)
class Field:
    """Dof vector bound to a space; the array is read-only."""

    space: object
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.space.ndofs,):
            raise ParameterError(f"field of length {values.shape} on space with {self.space.ndofs} dofs")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def nodal(self) -> np.ndarray:
        """Values reshaped to ``(n_nodes, components)``."""
        return self.values.reshape(-1, self.space.components)


class FormKind(str, Enum):
    MASS = "MASS"
    VISCOUS = "VISCOUS"
    DIVERGENCE = "DIVERGENCE"
    ELASTICITY = "ELASTICITY"
    INTERFACE_MASS = "INTERFACE_MASS"
    WEIGHTED_DIFFUSION = "WEIGHTED_DIFFUSION"


class NormKind(str, Enum):
    L2_DOMAIN = "L2_DOMAIN"
    L2_INTERFACE = "L2_INTERFACE"
    ENERGY = "ENERGY"
    SEMINORM_D = "SEMINORM_D"


def _blockify(local: np.ndarray, components: int) -> np.ndarray:
    """Expand scalar element matrices ``(ne, a, b)`` to interleaved vector blocks."""
    if components == 1:
        return local
    ne, na, nb = local.shape
    out = np.zeros((ne, na, components, nb, components))
    for c in range(components):
        out[:, :, c, :, c] = local
    return out.reshape(ne, na * components, nb * components)


def _scatter(local: np.ndarray, rows: np.ndarray, cols: np.ndarray, shape) -> sp.csr_matrix:
    r = np.broadcast_to(rows[:, :, None], local.shape).reshape(-1)
    c = np.broadcast_to(cols[:, None, :], local.shape).reshape(-1)
    A = sp.coo_matrix((local.reshape(-1), (r, c)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _require(coefficients: dict, *names):
    missing = [n for n in names if n not in coefficients]
    if missing:
        raise ParameterError(f"missing coefficient(s): {', '.join(missing)}")
    return [coefficients[n] for n in names]


def _vector_grad_forms(G: np.ndarray, wq: np.ndarray):
    """Element integrals of the two gradient contractions used by strain forms.

    ``lap[e,a,b] = int grad a . grad b`` and ``cross[e,a,c,b,d] = int d_d a * d_c b``
    where ``a``/``b`` index test/trial nodes.
    """
    lap = np.einsum("eq,eqak,eqbk->eab", wq, G, G)
    cross = np.einsum("eq,eqad,eqbc->eacbd", wq, G, G)
    return lap, cross


def assemble(kind, trial: FESpace, test: FESpace | None = None, **coefficients) -> sp.csr_matrix:
    """Assemble a bilinear form; rows index the test space, columns the trial space.

    Coefficients: ``mu_f`` for VISCOUS, ``mu_s``/``lambda_s`` for ELASTICITY,
    ``tau_m`` (one value per element) for WEIGHTED_DIFFUSION.
    """
    kind = FormKind(kind)
    test = trial if test is None else test
    if test.tri is not trial.tri:
        raise AssemblyError("trial and test spaces live on different triangulations")
    shape = (test.ndofs, trial.ndofs)

    if kind is FormKind.INTERFACE_MASS:
        if test is not trial:
            raise AssemblyError("INTERFACE_MASS needs identical trial and test spaces")
        tr = TraceSpace(trial)
        R = tr.restriction_matrix()
        return (R.T @ tr.mass() @ R).tocsr()

    if kind is FormKind.DIVERGENCE:
        if trial.components != 2 or test.components != 1:
            raise AssemblyError("DIVERGENCE needs a vector trial space and scalar test space")
        Nq, _, _, wq = test.quadrature()
        _, G, _, _ = trial.quadrature()
        local = np.einsum("eq,qi,eqbd->eibd", wq, Nq, G).reshape(len(wq), Nq.shape[1], -1)
        return _scatter(local, test.cell_dofs, trial.cell_dofs, shape)

    if test.degree != trial.degree or test.components != trial.components:
        raise AssemblyError(f"{kind.value} needs matching trial and test spaces")
    N, G, _, wq = trial.quadrature()
    comps = trial.components

    if kind is FormKind.MASS:
        local = _blockify(np.einsum("eq,qa,qb->eab", wq, N, N), comps)
    elif kind is FormKind.WEIGHTED_DIFFUSION:
        (tau,) = _require(coefficients, "tau_m")
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (len(wq),))
        lap = np.einsum("eq,eqak,eqbk->eab", wq, G, G)
        local = _blockify((1.0 + tau)[:, None, None] * lap, comps)
    elif kind in (FormKind.VISCOUS, FormKind.ELASTICITY):
        if comps != 2:
            raise AssemblyError(f"{kind.value} needs a vector space")
        lap, cross = _vector_grad_forms(G, wq)
        eye = np.eye(2)
        sym = np.einsum("eab,cd->eacbd", lap, eye) + cross
        if kind is FormKind.VISCOUS:
            (mu,) = _require(coefficients, "mu_f")
            local4 = mu * sym  # 2 mu D(u):D(v)
        else:
            mu, lam = _require(coefficients, "mu_s", "lambda_s")
            div = np.einsum("eq,eqac,eqbd->eacbd", wq, G, G)
            local4 = mu * sym + lam * div
        ne, nb = lap.shape[:2]
        local = local4.reshape(ne, nb * 2, nb * 2)
    else:  # pragma: no cover
        raise ParameterError(f"unknown form kind {kind}")
    return _scatter(local, test.cell_dofs, trial.cell_dofs, shape)


def evaluate(f, x: np.ndarray, y: np.ndarray, t: float, components: int) -> np.ndarray:
    """Evaluate ``f(x, y, t)`` and broadcast to ``(components, *x.shape)``."""
    if np.isscalar(f) or isinstance(f, (list, tuple, np.ndarray)):
        val = np.asarray(f, dtype=float)
        val = val.reshape(-1) if val.ndim else np.full(components, float(val))
    else:
        val = f(x, y, t)
    if components == 1:
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape)[None, ...].astype(float)
    out = np.empty((components,) + x.shape)
    for c in range(components):
        out[c] = np.broadcast_to(np.asarray(val[c], dtype=float), x.shape)
    return out


def interpolate(f, space, t: float = 0.0) -> Field:
    """Nodal interpolant of ``f(x, y, t)``; ``f`` may also be a constant."""
    X = space.node_coords if isinstance(space, FESpace) else space.coords
    vals = evaluate(f, X[:, 0], X[:, 1], t, space.components)
    return Field(space, vals.T.reshape(-1))


def load_vector(space: FESpace, f, t: float = 0.0) -> np.ndarray:
    """Right-hand side ``(f, v)`` by quadrature on every cell."""
    N, _, xq, wq = space.quadrature()
    vals = evaluate(f, xq[..., 0], xq[..., 1], t, space.components)  # (c, ne, nq)
    local = np.einsum("eq,qa,ceq->eac", wq, N, vals).reshape(len(wq), -1)
    return np.bincount(space.cell_dofs.reshape(-1), weights=local.reshape(-1), minlength=space.ndofs)


def cached_matrix(space: FESpace, key: str, **coefficients) -> sp.csr_matrix:
    ck = (key, tuple(sorted(coefficients.items())))
    if ck not in space._cache:
        space._cache[ck] = assemble(key, space, **coefficients)
    return space._cache[ck]


def _quadratic(A, v) -> float:
    return max(float(v @ (A @ v)), 0.0)


def norm(field: Field, kind=NormKind.L2_DOMAIN, **coefficients) -> float:
    """L2, interface L2, elastic energy or symmetric-gradient norm of a field."""
    kind = NormKind(kind)
    space, v = field.space, field.values
    if kind is NormKind.L2_INTERFACE:
        if isinstance(space, FESpace):
            trace = TraceSpace(space)
            return np.sqrt(_quadratic(trace.mass(), trace.restrict(v)))
        return np.sqrt(_quadratic(space.mass(), v))
    if not isinstance(space, FESpace):
        raise ParameterError(f"{kind.value} needs a volume space")
    if kind is NormKind.L2_DOMAIN:
        return np.sqrt(_quadratic(cached_matrix(space, "MASS"), v))
    if space.components != 2:
        raise ParameterError(f"{kind.value} needs a vector space")
    if kind is NormKind.ENERGY:
        mu, lam = _require(coefficients, "mu_s", "lambda_s")
        return np.sqrt(_quadratic(cached_matrix(space, "ELASTICITY", mu_s=mu, lambda_s=lam), v))
    return np.sqrt(_quadratic(cached_matrix(space, "VISCOUS", mu_f=0.5), v))


def field_at_quadrature(field: Field):
    """Values ``(ne, nq, c)`` and gradients ``(ne, nq, c, 2)`` of a field at quadrature points."""
    space = field.space
    N, G, _, _ = space.quadrature()
    c = space.components
    local = field.values[space.cell_dofs].reshape(len(space.cell_dofs), -1, c)  # (ne, nb, c)
    vals = np.einsum("qa,eac->eqc", N, local)
    grads = np.einsum("eqak,eac->eqck", G, local)
    return vals, grads


def error_norm(field: Field, exact, t: float, kind=NormKind.L2_DOMAIN, exact_grad=None,
               **coefficients) -> float:
    """Norm of ``exact(., t) - field`` evaluated at quadrature points.

    ``exact(x, y, t)`` returns the components; ``exact_grad(x, y, t)`` returns
    ``grad[c][k] = d exact_c / d x_k`` (needed for ENERGY and SEMINORM_D).
    """
    kind = NormKind(kind)
    space = field.space
    _, _, xq, wq = space.quadrature()
    vals, grads = field_at_quadrature(field)
    x, y = xq[..., 0], xq[..., 1]
    if kind is NormKind.L2_DOMAIN:
        ex = np.moveaxis(evaluate(exact, x, y, t, space.components), 0, -1)
        return float(np.sqrt(np.sum(wq * np.sum((ex - vals) ** 2, axis=-1))))
    if kind not in (NormKind.ENERGY, NormKind.SEMINORM_D) or space.components != 2:
        raise ParameterError(f"error_norm does not support {kind.value} on {space}")
    if exact_grad is None:
        raise ParameterError("exact_grad is required for gradient norms")
    g = exact_grad(x, y, t)
    eg = np.empty(x.shape + (2, 2))
    for c in range(2):
        for k in range(2):
            eg[..., c, k] = np.broadcast_to(np.asarray(g[c][k], dtype=float), x.shape)
    d = eg - grads
    strain = 0.5 * (d + np.swapaxes(d, -1, -2))
    sq = np.sum(strain ** 2, axis=(-1, -2))
    if kind is NormKind.SEMINORM_D:
        return float(np.sqrt(np.sum(wq * sq)))
    mu, lam = _require(coefficients, "mu_s", "lambda_s")
    div = d[..., 0, 0] + d[..., 1, 1]
    return float(np.sqrt(np.sum(wq * (2 * mu * sq + lam * div ** 2))))


def evaluate_at(f, X: np.ndarray, t: float, components: int) -> np.ndarray:
    """``f`` at points ``X``, shaped ``(n_points, components)``."""
    return evaluate(f, X[:, 0], X[:, 1], t, components).T
