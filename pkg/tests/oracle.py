"""Independent brute-force finite-element oracle used by the tests.

Shape functions are built per element from a monomial Vandermonde system in
physical coordinates, integrals use a collapsed (Duffy) tensor Gauss rule of
high order, and global numbering is recovered purely from node coordinates.
Nothing here shares code with the package's assembly.
"""

import itertools

import numpy as np

GAUSS_ORDER = 8


def _monomials(degree):
    return [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]


def _duffy_rule(a, b, c, order=GAUSS_ORDER):
    """Points and weights on the physical triangle ``abc``."""
    g, w = np.polynomial.legendre.leggauss(order)
    g = 0.5 * (g + 1.0)
    w = 0.5 * w
    pts, wts = [], []
    for (s, ws), (r, wr) in itertools.product(zip(g, w), zip(g, w)):
        # (s, r) in the unit square -> (xi, eta) in the reference triangle
        xi, eta = s * (1.0 - r), r
        pts.append(a + xi * (b - a) + eta * (c - a))
        wts.append(ws * wr * (1.0 - r))
    J = abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0])
    return np.array(pts), np.array(wts) * J


class LocalBasis:
    """Lagrange basis of the given degree on one physical triangle."""

    def __init__(self, verts, degree):
        a, b, c = verts
        nodes = [a, b, c]
        if degree == 2:
            nodes += [0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)]
        self.nodes = np.array(nodes)
        self.exps = _monomials(degree)
        V = np.array([[x ** i * y ** j for (i, j) in self.exps] for x, y in self.nodes])
        self.coef = np.linalg.inv(V)  # column k = coefficients of basis k

    def values(self, pts):
        M = np.array([[x ** i * y ** j for (i, j) in self.exps] for x, y in pts])
        return M @ self.coef

    def grads(self, pts):
        dx = np.array([[i * x ** max(i - 1, 0) * y ** j if i else 0.0 for (i, j) in self.exps]
                       for x, y in pts])
        dy = np.array([[j * x ** i * y ** max(j - 1, 0) if j else 0.0 for (i, j) in self.exps]
                       for x, y in pts])
        return np.stack([dx @ self.coef, dy @ self.coef], axis=-1)  # (nq, nb, 2)


def node_lookup(node_coords):
    return {(round(float(x), 12), round(float(y), 12)): k for k, (x, y) in enumerate(node_coords)}


def _global_nodes(basis, lookup):
    return [lookup[(round(float(x), 12), round(float(y), 12))] for x, y in basis.nodes]


def _vec_grads(G):
    """Gradients of the vector basis (component-interleaved): (nq, 2nb, 2, 2)."""
    nq, nb, _ = G.shape
    out = np.zeros((nq, 2 * nb, 2, 2))
    for k in range(nb):
        for c in range(2):
            out[:, 2 * k + c, c, :] = G[:, k, :]
    return out


def assemble_dense(kind, vertices, triangles, node_coords, degree, components, test_coords=None,
                   test_degree=None, boundary_edges=None, **coef):
    """Dense global matrix of one bilinear form."""
    lookup = node_lookup(node_coords)
    n = len(node_coords) * components
    if kind == "DIVERGENCE":
        tlookup = node_lookup(test_coords)
        A = np.zeros((len(test_coords), n))
    else:
        A = np.zeros((n, n))
    if kind == "INTERFACE_MASS":
        return _interface_mass(vertices, boundary_edges, node_coords, lookup, degree, components, n)
    for e, tri in enumerate(triangles):
        verts = vertices[tri]
        pts, wts = _duffy_rule(*verts)
        B = LocalBasis(verts, degree)
        gn = _global_nodes(B, lookup)
        dofs = [g * components + c for g in gn for c in range(components)]
        N = B.values(pts)
        G = B.grads(pts)
        if kind == "MASS":
            if components == 1:
                loc = np.einsum("q,qi,qj->ij", wts, N, N)
            else:
                Nl = np.zeros((len(pts), 2 * N.shape[1], 2))
                Nl[:, 0::2, 0] = N
                Nl[:, 1::2, 1] = N
                loc = np.einsum("q,qic,qjc->ij", wts, Nl, Nl)
        elif kind == "WEIGHTED_DIFFUSION":
            k = 1.0 + coef["tau_m"][e]
            loc = k * np.einsum("q,qid,qjd->ij", wts, G, G)
        else:
            VG = _vec_grads(G)
            D = 0.5 * (VG + VG.transpose(0, 1, 3, 2))
            div = np.trace(VG, axis1=2, axis2=3)
            if kind == "VISCOUS":
                loc = 2.0 * coef["mu_f"] * np.einsum("q,qiab,qjab->ij", wts, D, D)
            elif kind == "ELASTICITY":
                loc = (2.0 * coef["mu_s"] * np.einsum("q,qiab,qjab->ij", wts, D, D)
                       + coef["lambda_s"] * np.einsum("q,qi,qj->ij", wts, div, div))
            elif kind == "DIVERGENCE":
                Bq = LocalBasis(verts, test_degree)
                tn = _global_nodes(Bq, tlookup)
                Nq = Bq.values(pts)
                loc = np.einsum("q,qk,qj->kj", wts, Nq, div)
                A[np.ix_(tn, dofs)] += loc
                continue
            else:
                raise ValueError(kind)
        A[np.ix_(dofs, dofs)] += loc
    return A


def _interface_mass(vertices, edges, node_coords, lookup, degree, components, n):
    A = np.zeros((n, n))
    g, w = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    s = 0.5 * (g + 1.0)
    w = 0.5 * w
    for p, q in edges:
        a, b = vertices[p], vertices[q]
        length = np.linalg.norm(b - a)
        if degree == 1:
            nodes = [a, b]
            vals = np.stack([1 - s, s], axis=1)
        else:
            nodes = [a, b, 0.5 * (a + b)]
            vals = np.stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)], axis=1)
        gn = [lookup[(round(float(x), 12), round(float(y), 12))] for x, y in nodes]
        loc = length * np.einsum("q,qi,qj->ij", w, vals, vals)
        for c in range(components):
            d = [k * components + c for k in gn]
            A[np.ix_(d, d)] += loc
    return A


def integrate(f, vertices, triangles):
    """High-order quadrature of a scalar function over the triangulation."""
    total = 0.0
    for tri in triangles:
        pts, wts = _duffy_rule(*vertices[tri])
        total += float(np.sum(wts * f(pts[:, 0], pts[:, 1])))
    return total
