"""P1 (1D) / Q1 (2D) finite element spaces with eliminated Dirichlet
boundary conditions, matrix assembly, and the zero-extension / restriction
operators between a base space and a space on its extended mesh."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConfigurationError
from .mesh import EXTENSION_BOUNDARY, INTERIOR_DOMAIN_BOUNDARY, ExtendedMesh, Mesh

_GP = 1.0 / np.sqrt(3.0)
# 2x2 Gauss points / weights on the reference square [-1,1]^2
_QPOINTS = np.array([(-_GP, -_GP), (_GP, -_GP), (_GP, _GP), (-_GP, _GP)])
_QWEIGHTS = np.ones(4)


def _q1_shape(xi, eta):
    n = 0.25 * np.array(
        [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)]
    )
    dn = 0.25 * np.array(
        [
            [-(1 - eta), -(1 - xi)],
            [(1 - eta), -(1 + xi)],
            [(1 + eta), (1 + xi)],
            [-(1 + eta), (1 - xi)],
        ]
    )
    return n, dn


@dataclass(frozen=True)
class SparseOperator:
    """Assembled sparse matrix plus a symmetry hint.

    hint is one of {symmetric, skew, general}.
    """

    matrix: sp.csr_matrix
    symmetry_hint: str = "general"

    @property
    def rows(self):
        return self.matrix.shape[0]

    @property
    def cols(self):
        return self.matrix.shape[1]

    @property
    def symmetric(self):
        return self.symmetry_hint == "symmetric"

    def matvec(self, v):
        return self.matrix @ v

    def __matmul__(self, v):
        return self.matrix @ v

    def toarray(self):
        return self.matrix.toarray()

    def write_matrix_market(self, path):
        from scipy.io import mmwrite

        mmwrite(str(path), self.matrix)


class FeSpace:
    """Nodal space of continuous piecewise (bi)linear functions vanishing on
    the tagged Dirichlet boundary.

    On a base mesh the Dirichlet boundary is the domain boundary; on an
    extended mesh it is the outer (extension) boundary only.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        if isinstance(mesh, ExtendedMesh):
            fixed = mesh.boundary_vertices(EXTENSION_BOUNDARY)
        else:
            fixed = mesh.boundary_vertices(INTERIOR_DOMAIN_BOUNDARY)
        mask = np.zeros(mesh.num_vertices, dtype=bool)
        mask[fixed] = True
        self.dirichlet_mask = mask
        self.dof_of_vertex = -np.ones(mesh.num_vertices, dtype=int)
        free = np.flatnonzero(~mask)
        self.dof_of_vertex[free] = np.arange(free.size)
        self.vertex_of_dof = free
        self.dof_count = free.size
        self.dof_coords = mesh.vertices[free]

    def interpolate(self, fn):
        """DoF vector of the nodal interpolant of fn (callable on points)."""
        pts = self.dof_coords
        if self.mesh.dimension == 1:
            return np.asarray([fn(p[0]) for p in pts], dtype=float)
        return np.asarray([fn(p[0], p[1]) for p in pts], dtype=float)

    def eval_matrix(self, points):
        """Sparse (npoints x dof_count) evaluation matrix at given points.

        Supports 1D meshes and 2D meshes with axis-aligned rectangular cells
        (the nested-hierarchy domains).  Used for prolongation/injection.
        """
        mesh = self.mesh
        points = np.atleast_2d(points)
        rows, cols, vals = [], [], []
        cellv = mesh.vertices[mesh.cells]
        if mesh.dimension == 1:
            lo = cellv[:, 0, 0]
            hi = cellv[:, 1, 0]
            for ip, p in enumerate(points[:, 0]):
                ic = np.flatnonzero((p >= lo - 1e-12) & (p <= hi + 1e-12))
                if ic.size == 0:
                    raise ConfigurationError("point %g outside mesh" % p)
                c = mesh.cells[ic[0]]
                t = (p - lo[ic[0]]) / (hi[ic[0]] - lo[ic[0]])
                for vtx, w in ((c[0], 1 - t), (c[1], t)):
                    d = self.dof_of_vertex[vtx]
                    if d >= 0 and abs(w) > 1e-14:
                        rows.append(ip)
                        cols.append(d)
                        vals.append(w)
        else:
            x0 = cellv[:, :, 0].min(axis=1)
            x1 = cellv[:, :, 0].max(axis=1)
            y0 = cellv[:, :, 1].min(axis=1)
            y1 = cellv[:, :, 1].max(axis=1)
            for ip, p in enumerate(points):
                ic = np.flatnonzero(
                    (p[0] >= x0 - 1e-12) & (p[0] <= x1 + 1e-12) & (p[1] >= y0 - 1e-12) & (p[1] <= y1 + 1e-12)
                )
                if ic.size == 0:
                    raise ConfigurationError("point %s outside mesh" % p)
                k = ic[0]
                c = mesh.cells[k]
                # axis-aligned bilinear interpolation
                tx = (p[0] - x0[k]) / (x1[k] - x0[k])
                ty = (p[1] - y0[k]) / (y1[k] - y0[k])
                for vtx in c:
                    vx, vy = mesh.vertices[vtx]
                    wx = tx if abs(vx - x1[k]) < 1e-12 else 1 - tx
                    wy = ty if abs(vy - y1[k]) < 1e-12 else 1 - ty
                    d = self.dof_of_vertex[vtx]
                    if d >= 0 and abs(wx * wy) > 1e-14:
                        rows.append(ip)
                        cols.append(d)
                        vals.append(wx * wy)
        return sp.csr_matrix((vals, (rows, cols)), shape=(points.shape[0], self.dof_count))


def _as_matrix_coeff(coeff_A, dim):
    if callable(coeff_A):
        return coeff_A
    A = np.asarray(coeff_A, dtype=float)
    if A.ndim == 0:
        A = float(A) * np.eye(dim)
    return lambda *x: A


def _check_spd(A):
    A = np.atleast_2d(A)
    if not np.allclose(A, A.T):
        raise AssemblyError("diffusion coefficient sample is not symmetric")
    if np.any(np.linalg.eigvalsh(A) <= 0):
        raise AssemblyError("diffusion coefficient sample is not positive definite")


def _scatter(space, locs, hint):
    """Assemble per-cell local matrices locs (nc, k, k) into a CSR matrix on
    the free DoFs (Dirichlet rows/columns eliminated)."""
    mesh = space.mesh
    nloc = mesh.cells.shape[1]
    dofs = space.dof_of_vertex[mesh.cells]  # (nc, k)
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    vals = np.asarray(locs).reshape(-1)
    keep = (rows >= 0) & (cols >= 0)
    n = space.dof_count
    mat = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
    mat.sum_duplicates()
    return SparseOperator(mat, hint)


def _assemble(space, local_fn, hint):
    """Generic cell loop; local_fn(cell vertex coords) -> local matrix."""
    mesh = space.mesh
    locs = np.array([local_fn(mesh.vertices[cell]) for cell in mesh.cells])
    return _scatter(space, locs, hint)


def _q1_geometry(mesh):
    """Batched Jacobian data at the 2x2 Gauss points for all quads.

    Returns detJ (nq, nc) and physical gradients (nq, nc, 4, 2).
    """
    coords = mesh.vertices[mesh.cells]  # (nc, 4, 2)
    dets, grads, shapes = [], [], []
    for xi, eta in _QPOINTS:
        n, dn = _q1_shape(xi, eta)
        J = np.einsum("cad,ak->cdk", coords, dn)  # (nc, 2, 2)
        detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if np.any(detJ <= 0):
            raise AssemblyError("degenerate or inverted quadrilateral")
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1]
        inv[:, 1, 1] = J[:, 0, 0]
        inv[:, 0, 1] = -J[:, 0, 1]
        inv[:, 1, 0] = -J[:, 1, 0]
        inv /= detJ[:, None, None]
        dets.append(detJ)
        grads.append(np.einsum("ak,ckd->cad", dn, inv))
        shapes.append(n)
    return np.array(dets), np.array(grads), np.array(shapes), coords


def assemble_stiffness(space, coeff_A=1.0, coeff_c=0.0):
    """Matrix of the form  grad(w)' A(x) grad(v) + c(x) v w.

    Exact in 1D and with 2x2 Gauss on quads for piecewise-constant
    coefficients; variable coefficients are sampled at quadrature points.
    """
    dim = space.mesh.dimension
    Afn = _as_matrix_coeff(coeff_A, dim)
    cfn = coeff_c if callable(coeff_c) else (lambda *x: float(coeff_c))

    if dim == 1:
        if not callable(coeff_A) and not callable(coeff_c):
            a = float(np.atleast_2d(_as_matrix_coeff(coeff_A, 1)(0.0))[0, 0])
            c = float(coeff_c)
            _check_spd([[a]])
            if c < 0:
                raise AssemblyError("reaction coefficient must be nonnegative")
            h = space.mesh.cell_measures()
            locs = (a / h)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])[None]
            locs = locs + (c * h / 6.0)[:, None, None] * np.array([[2.0, 1.0], [1.0, 2.0]])[None]
            return _scatter(space, locs, "symmetric")

        def local(coords):
            h = coords[1, 0] - coords[0, 0]
            xm = 0.5 * (coords[0, 0] + coords[1, 0])
            a = float(np.atleast_2d(Afn(xm))[0, 0])
            c = cfn(xm)
            _check_spd([[a]])
            if c < 0:
                raise AssemblyError("reaction coefficient must be nonnegative")
            k = a / h * np.array([[1.0, -1.0], [-1.0, 1.0]])
            m = c * h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
            return k + m
    else:
        if not callable(coeff_A) and not callable(coeff_c):
            A = np.atleast_2d(_as_matrix_coeff(coeff_A, 2)(0.0, 0.0))
            _check_spd(A)
            c = float(coeff_c)
            if c < 0:
                raise AssemblyError("reaction coefficient must be nonnegative")
            dets, grads, shapes, _ = _q1_geometry(space.mesh)
            locs = 0.0
            for q, w in enumerate(_QWEIGHTS):
                g = grads[q]  # (nc, 4, 2)
                gA = g @ A
                locs = locs + w * dets[q][:, None, None] * (
                    np.einsum("cad,cbd->cab", gA, g) + c * np.einsum("a,b->ab", shapes[q], shapes[q])
                )
            return _scatter(space, locs, "symmetric")

        def local(coords):
            loc = np.zeros((4, 4))
            for (xi, eta), w in zip(_QPOINTS, _QWEIGHTS):
                n, dn = _q1_shape(xi, eta)
                J = coords.T @ dn  # (2,2) Jacobian
                detJ = np.linalg.det(J)
                if detJ <= 0:
                    raise AssemblyError("degenerate or inverted quadrilateral")
                grads = dn @ np.linalg.inv(J)  # (4,2) physical gradients
                x = n @ coords
                A = np.atleast_2d(Afn(*x))
                _check_spd(A)
                c = cfn(*x)
                if c < 0:
                    raise AssemblyError("reaction coefficient must be nonnegative")
                loc += w * detJ * (grads @ A @ grads.T + c * np.outer(n, n))
            return loc

    return _assemble(space, local, "symmetric")


def assemble_mass(space):
    """L2 mass matrix, exact for affine (1D) and bilinear (2D) cell maps."""
    dim = space.mesh.dimension
    if dim == 1:
        h = space.mesh.cell_measures()
        locs = h[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])[None]
        return _scatter(space, locs, "symmetric")
    dets, _, shapes, _ = _q1_geometry(space.mesh)
    locs = 0.0
    for q, w in enumerate(_QWEIGHTS):
        locs = locs + w * dets[q][:, None, None] * np.outer(shapes[q], shapes[q])[None]
    return _scatter(space, locs, "symmetric")


def assemble_advection(space, beta):
    """Matrix of the drift form  (beta . grad v, w); skew on interior DoFs
    for constant (divergence-free) beta."""
    dim = space.mesh.dimension
    bfn = beta if callable(beta) else (lambda *x: np.atleast_1d(np.asarray(beta, dtype=float)))

    if dim == 1:
        def local(coords):
            xm = 0.5 * (coords[0, 0] + coords[1, 0])
            b = float(np.atleast_1d(bfn(xm))[0])
            # int phi_j' phi_i = +-1/2 regardless of h
            return b * np.array([[-0.5, 0.5], [-0.5, 0.5]])
    else:
        def local(coords):
            loc = np.zeros((4, 4))
            for (xi, eta), w in zip(_QPOINTS, _QWEIGHTS):
                n, dn = _q1_shape(xi, eta)
                J = coords.T @ dn
                detJ = np.linalg.det(J)
                grads = dn @ np.linalg.inv(J)
                x = n @ coords
                b = np.atleast_1d(bfn(*x))
                loc += w * detJ * np.outer(n, grads @ b)
            return loc

    return _assemble(space, local, "skew")


def assemble_load(space, f):
    """Load vector (f, phi_i); equals the pairing of the L2 projection of f."""
    mesh = space.mesh
    out = np.zeros(space.dof_count)
    ffn = f if callable(f) else (lambda *x: float(f))
    for cell in mesh.cells:
        coords = mesh.vertices[cell]
        dofs = space.dof_of_vertex[cell]
        if mesh.dimension == 1:
            h = coords[1, 0] - coords[0, 0]
            # 2-point Gauss, exact for cubics
            for t, w in ((0.5 - 0.5 * _GP, 0.5), (0.5 + 0.5 * _GP, 0.5)):
                x = coords[0, 0] + t * h
                fv = ffn(x)
                for a, na in ((0, 1 - t), (1, t)):
                    if dofs[a] >= 0:
                        out[dofs[a]] += w * h * fv * na
        else:
            for (xi, eta), w in zip(_QPOINTS, _QWEIGHTS):
                n, dn = _q1_shape(xi, eta)
                detJ = np.linalg.det(coords.T @ dn)
                x = n @ coords
                fv = ffn(*x)
                for a in range(4):
                    if dofs[a] >= 0:
                        out[dofs[a]] += w * detJ * fv * n[a]
    return out


def extension_op(base, ext):
    """Zero-extension matrix E (ext dofs x base dofs): E injects base DoF
    values at matching nodes and zeros elsewhere."""
    if not isinstance(ext.mesh, ExtendedMesh) or ext.mesh.base is not base.mesh:
        raise ConfigurationError("ext must be built over an ExtendedMesh of base's mesh")
    rows, cols = [], []
    for dof, vtx in enumerate(base.vertex_of_dof):
        edof = ext.dof_of_vertex[vtx]  # identity node map: same vertex index
        if edof < 0:
            raise ConfigurationError("base DoF fixed in the extended space")
        rows.append(edof)
        cols.append(dof)
    vals = np.ones(len(rows))
    return sp.csr_matrix((vals, (rows, cols)), shape=(ext.dof_count, base.dof_count))


def restriction_op(base, ext):
    """Left inverse R of the zero extension: R E = identity on base DoFs."""
    return extension_op(base, ext).T.tocsr()
