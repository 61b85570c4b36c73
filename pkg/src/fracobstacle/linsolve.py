"""Krylov solvers over abstract operators and the two preconditioners used
for the fractional system: the inverse discrete spectral fractional
Laplacian (pure fractional case) and a multilevel operator built from
quasi-interpolation differences across a nested mesh hierarchy."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ConvergenceFailure, NumericalError
from .fespace import SparseOperator, assemble_load, assemble_mass

_SPECTRAL_DOF_LIMIT = 5000


@dataclass
class KrylovConfig:
    method: str = "cg"
    rel_tol: float = 1e-10
    max_iter: int = 10_000
    preconditioner: object = None  # None or operator with matvec/shape
    preconditioner_name: str = "none"

    def __post_init__(self):
        if self.method not in ("cg", "bicgstab"):
            raise ConfigurationError("method must be 'cg' or 'bicgstab'")
        if not 0.0 < self.rel_tol < 1.0:
            raise ConfigurationError("rel_tol must lie in (0,1)")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be at least 1")


def _as_linear_operator(op):
    """Wrap matrices / SparseOperator / callables; returns (linop, hint)."""
    if isinstance(op, SparseOperator):
        return spla.aslinearoperator(op.matrix), op.symmetry_hint
    if isinstance(op, spla.LinearOperator):
        return op, "general"
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return spla.aslinearoperator(op), "general"
    raise ConfigurationError("unsupported operator type %r" % type(op))


def solve(op, rhs, cfg):
    """Solve op x = rhs; returns (x, iterations, relative residual)."""
    linop, hint = _as_linear_operator(op)
    rhs = np.asarray(rhs, dtype=float)
    if linop.shape[0] != linop.shape[1]:
        raise ConfigurationError("operator must be square")
    if not np.all(np.isfinite(rhs)):
        raise ConfigurationError("right-hand side must be finite")
    if cfg.method == "cg" and hint not in ("symmetric",) and isinstance(op, SparseOperator):
        raise ConfigurationError("cg requires a symmetric operator (hint is %r)" % hint)

    M = None
    if cfg.preconditioner is not None:
        M, _ = _as_linear_operator(cfg.preconditioner)

    count = {"n": 0}

    def callback(_):
        count["n"] += 1

    kry = spla.cg if cfg.method == "cg" else spla.bicgstab
    x, info = kry(linop, rhs, rtol=cfg.rel_tol, atol=0.0, maxiter=cfg.max_iter, M=M, callback=callback)
    nrhs = np.linalg.norm(rhs)
    res = np.linalg.norm(linop @ x - rhs) / (nrhs if nrhs > 0 else 1.0)
    if info < 0:
        raise NumericalError("%s breakdown (info=%d), residual %g" % (cfg.method, info, res))
    if info > 0 and res > cfg.rel_tol:
        raise ConvergenceFailure(
            "%s failed to converge in %d iterations" % (cfg.method, cfg.max_iter),
            residual=res, iterations=count["n"],
        )
    return x, count["n"], res


def spectral_precond(stiff0, mass0, s):
    """Inverse discrete spectral fractional Laplacian  v -> sum lam_j^{-s} (psi_j' v) psi_j
    with mass-orthonormal generalized eigenpairs of (stiff0, mass0)."""
    if not 0.0 <= s <= 1.0:
        raise ConfigurationError("order s must lie in [0,1]")
    A = stiff0.toarray() if hasattr(stiff0, "toarray") else np.asarray(stiff0)
    B = mass0.toarray() if hasattr(mass0, "toarray") else np.asarray(mass0)
    n = A.shape[0]
    if n > _SPECTRAL_DOF_LIMIT:
        raise ConfigurationError(
            "spectral preconditioner limited to %d DoFs (got %d)" % (_SPECTRAL_DOF_LIMIT, n)
        )
    try:
        lam, psi = scipy.linalg.eigh(A, B)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("generalized eigendecomposition failed: %s" % exc)
    if np.any(lam <= 0):
        raise NumericalError("nonpositive stiffness eigenvalue %g" % lam.min())
    scale = lam ** (-s)

    def mv(v):
        return psi @ (scale * (psi.T @ v))

    return spla.LinearOperator((n, n), matvec=mv, rmatvec=mv, dtype=float)


@dataclass
class MultilevelHierarchy:
    """Nested coarse-to-fine spaces with prolongations to the finest level
    and the quasi-interpolation weights (1, phi_i) per level."""

    spaces: list
    h_levels: np.ndarray
    prolong: list  # P_j: level-j DoFs -> finest DoFs (identity at the top)
    unit_loads: list  # (1, phi_i) on each level
    mass_fine: sp.csr_matrix
    a_bar: float = 1.0


def build_hierarchy(spaces, coeff_A=1.0):
    """Assemble hierarchy data for a coarse-to-fine list of nested spaces."""
    if len(spaces) < 2:
        raise ConfigurationError("hierarchy needs at least 2 levels")
    meshes = [sp_.mesh for sp_ in spaces]
    for a, b in zip(meshes, meshes[1:]):
        if a.domain_id != b.domain_id or a.level >= b.level:
            raise ConfigurationError("spaces must be nested coarse-to-fine on one domain")
    fine = spaces[-1]
    prolong = []
    for sp_ in spaces[:-1]:
        prolong.append(sp_.eval_matrix(fine.dof_coords))
    prolong.append(sp.identity(fine.dof_count, format="csr"))
    unit_loads = [assemble_load(sp_, 1.0) for sp_ in spaces]
    if callable(coeff_A):
        samples = [np.linalg.eigvalsh(np.atleast_2d(coeff_A(*p))).max() for p in fine.dof_coords]
        a_bar = float(np.max(samples))
    else:
        A = np.asarray(coeff_A, dtype=float)
        a_bar = float(np.max(np.linalg.eigvalsh(np.atleast_2d(A))) if A.ndim else A)
    h_levels = np.array([m.h_max for m in meshes])
    return MultilevelHierarchy(list(spaces), h_levels, prolong, unit_loads, assemble_mass(fine).matrix, a_bar)


def multilevel_precond(hier, s):
    """Multilevel operator  B = sum_j w_j (Qt_{j+1} - Qt_j)^2  with weights
    w_j = (a_bar h_j^-2 + h_j^-2s)^-1, acting on residual vectors.

    Qt_j is the weighted quasi-interpolation onto level j, realized on
    coefficient vectors as G_j M with G_j = P_j diag(1/(1,phi_i)) P_j'.
    The squared difference becomes (G_{j+1}-G_j) M (G_{j+1}-G_j) on the
    residual side, which is symmetric positive semidefinite.
    """
    if not 0.0 < s < 1.0:
        raise ConfigurationError("order s must lie in (0,1)")
    J = len(hier.spaces)
    n = hier.spaces[-1].dof_count
    w = 1.0 / (hier.a_bar * hier.h_levels[:-1] ** -2.0 + hier.h_levels[:-1] ** (-2.0 * s))

    def G(j, r):
        P = hier.prolong[j]
        return P @ ((P.T @ r) / hier.unit_loads[j])

    def mv(r):
        r = np.asarray(r, dtype=float)
        g = [G(j, r) for j in range(J)]
        out = np.zeros(n)
        for j in range(J - 1):
            d = g[j + 1] - g[j]
            md = hier.mass_fine @ d
            out += w[j] * (G(j + 1, md) - G(j, md))
        return out

    return spla.LinearOperator((n, n), matvec=mv, rmatvec=mv, dtype=float)
