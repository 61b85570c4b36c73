"""Discrete obstacle problem for the operator
iota*(-div(A grad) + c) + beta.grad + (-Laplace)^s
solved by a primal-dual active set (PDAS) iteration with Schur-complement
inner solves, plus a penalized-problem solver used as a cross-check.

Multiplier sign convention: Lambda := S U - F >= 0 componentwise at the
solution, with Lambda_i (U - Psi)_i = 0 (complementarity).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ConvergenceFailure
from .fespace import assemble_advection, assemble_load, assemble_mass, assemble_stiffness
from .fraclap import apply_fractional, dense_gram, energy_norm
from .linsolve import KrylovConfig, solve as krylov_solve

_DENSE_DOF_LIMIT = 5000


def interpolate_obstacle(chi, space):
    """Nodal interpolant of the obstacle; warns when the obstacle is
    positive at a Dirichlet boundary vertex (the admissible set is then
    incompatible with the zero boundary condition)."""
    psi = space.interpolate(chi)
    bverts = np.flatnonzero(space.dirichlet_mask)
    if bverts.size:
        pts = space.mesh.vertices[bverts]
        vals = [chi(*p) if space.mesh.dimension == 2 else chi(p[0]) for p in pts]
        # chi = 0 on the boundary is still admissible (u = 0 >= chi)
        if np.max(vals) > 1e-12:
            warnings.warn("obstacle is positive at a Dirichlet boundary vertex", stacklevel=2)
    return psi


def theta_eps(t, eps):
    """C^1 cubic cutoff: 1 for t <= 0, 0 for t >= eps, smoothstep between."""
    if eps <= 0:
        raise ConfigurationError("penalty width eps must be positive")
    tau = np.clip(np.asarray(t, dtype=float) / eps, 0.0, 1.0)
    return 1.0 - 3.0 * tau**2 + 2.0 * tau**3


@dataclass
class PdasState:
    U: np.ndarray
    Lam: np.ndarray
    active: np.ndarray
    iteration: int = 0


class DiscreteObstacleProblem:
    """System operator + obstacle + load with solve/apply entry points.

    Built either from a sinc scheme (build_problem) or from an explicit
    dense matrix (from_matrix, used for small cross-check instances).
    """

    def __init__(self, n, apply_fn, solve_fn, solve_multi, symmetric, psi, load,
                 rho, eps_stop, inc_norm, mass0=None, meta=None):
        if rho <= 0:
            raise ConfigurationError("PDAS constant rho must be positive")
        self.n = n
        self.apply = apply_fn
        self.solve = solve_fn
        self.solve_multi = solve_multi
        self.symmetric = symmetric
        self.psi = np.asarray(psi, dtype=float)
        self.load = np.asarray(load, dtype=float)
        self.rho = rho
        self.eps_stop = eps_stop
        self.inc_norm = inc_norm
        self.mass0 = mass0
        self.meta = meta or {}
        self._solved_load = None

    def solve_load(self):
        """Cached unconstrained solution S^{-1} F."""
        if self._solved_load is None:
            self._solved_load = self.solve(self.load)
        return self._solved_load

    @classmethod
    def from_matrix(cls, S, F, psi, rho=1.0, eps_stop=1e-8):
        S = np.asarray(S, dtype=float)
        n = S.shape[0]
        lu = scipy.linalg.lu_factor(S)
        sym = bool(np.allclose(S, S.T, rtol=1e-12, atol=1e-12))
        return cls(
            n,
            apply_fn=lambda v: S @ v,
            solve_fn=lambda rhs: scipy.linalg.lu_solve(lu, rhs),
            solve_multi=lambda rhs: scipy.linalg.lu_solve(lu, rhs),
            symmetric=sym,
            psi=F * 0 + psi if np.ndim(psi) == 0 else psi,
            load=F,
            rho=rho,
            eps_stop=eps_stop,
            inc_norm=np.linalg.norm,
            meta={"dense": True, "matrix": S},
        )


def build_problem(scheme, iota, f, chi, coeff_A=1.0, coeff_c=0.0, beta=None,
                  rho=1.0, eps_stop=1e-8, dense=None, inner_tol=1e-10):
    """Assemble the full discrete problem over a quadrature scheme.

    When the base space is small enough the fractional Gram matrix is
    materialized and all solves use one dense LU factorization; otherwise
    the system stays apply-only and inner solves run unpreconditioned
    Krylov iterations at inner_tol.
    """
    if iota not in (0, 1):
        raise ConfigurationError("iota must be 0 or 1")
    base = scheme.base
    n = base.dof_count
    stiff0 = assemble_stiffness(base)  # unit-coefficient Dirichlet form for the norm
    sparse_part = None
    if iota:
        sparse_part = assemble_stiffness(base, coeff_A, coeff_c).matrix
    has_drift = beta is not None and np.any(np.asarray(beta, dtype=float) != 0)
    if has_drift:
        drift = assemble_advection(base, beta).matrix
        sparse_part = drift if sparse_part is None else sparse_part + drift
    symmetric = not has_drift

    psi = interpolate_obstacle(chi, base)
    load = assemble_load(base, f)
    mass0 = assemble_mass(base).matrix

    if dense is None:
        dense = n <= _DENSE_DOF_LIMIT

    def norm(v):
        return energy_norm(scheme, iota, stiff0, v)

    meta = {"scheme": scheme, "iota": iota, "stiff0": stiff0, "dense": dense}

    if dense:
        Gfrac = dense_gram(scheme)
        S = Gfrac if sparse_part is None else Gfrac + sparse_part.toarray()
        lu = scipy.linalg.lu_factor(S)
        meta["matrix"] = S
        meta["frac_gram"] = Gfrac

        def norm(v):  # noqa: F811 - dense path reuses the materialized Gram
            q = float(v @ (Gfrac @ v))
            if iota:
                q += float(v @ (stiff0.matrix @ v))
            return np.sqrt(max(q, 0.0))

        return DiscreteObstacleProblem(
            n,
            apply_fn=lambda v: S @ v,
            solve_fn=lambda rhs: scipy.linalg.lu_solve(lu, rhs),
            solve_multi=lambda rhs: scipy.linalg.lu_solve(lu, rhs),
            symmetric=symmetric,
            psi=psi, load=load, rho=rho, eps_stop=eps_stop,
            inc_norm=norm, mass0=mass0, meta=meta,
        )

    def apply_fn(v):
        out = apply_fractional(scheme, v)
        if sparse_part is not None:
            out = out + sparse_part @ v
        return out

    linop = spla.LinearOperator((n, n), matvec=apply_fn, dtype=float)
    cfg = KrylovConfig(method="cg" if symmetric else "bicgstab", rel_tol=inner_tol, max_iter=10 * n + 200)

    def solve_fn(rhs):
        x, _, _ = krylov_solve(linop, rhs, cfg)
        return x

    return DiscreteObstacleProblem(
        n, apply_fn=apply_fn, solve_fn=solve_fn, solve_multi=None,
        symmetric=symmetric, psi=psi, load=load, rho=rho, eps_stop=eps_stop,
        inc_norm=norm, mass0=mass0, meta=meta,
    )


def schur_step(prob, active, inner_tol=1e-10):
    """Solve the saddle system for a frozen active set.

    Lambda on the active set solves [I S^{-1} I'] Lam = I (Psi - S^{-1} F),
    then U = S^{-1}(F + I' Lam); Lambda vanishes off the active set.
    """
    active = np.asarray(active, dtype=int)
    if active.size and (np.any(np.diff(active) <= 0) or active.min() < 0 or active.max() >= prob.n):
        raise ConfigurationError("active set must be strictly increasing valid indices")
    Lam = np.zeros(prob.n)
    sinv_f = prob.solve_load()
    if active.size == 0:
        return sinv_f.copy(), Lam
    rhs_a = prob.psi[active] - sinv_f[active]
    if prob.solve_multi is not None:
        cols = np.zeros((prob.n, active.size))
        cols[active, np.arange(active.size)] = 1.0
        X = prob.solve_multi(cols)  # S^{-1} I'
        lam_a = np.linalg.solve(X[active, :], rhs_a)
    else:
        def smv(la):
            w = np.zeros(prob.n)
            w[active] = la
            return prob.solve(w)[active]

        sop = spla.LinearOperator((active.size, active.size), matvec=smv, dtype=float)
        cfg = KrylovConfig(method="cg" if prob.symmetric else "bicgstab",
                           rel_tol=inner_tol, max_iter=10 * active.size + 200)
        lam_a, _, _ = krylov_solve(sop, rhs_a, cfg)
    Lam[active] = lam_a
    scattered = np.zeros(prob.n)
    scattered[active] = lam_a
    U = prob.solve(prob.load + scattered)
    return U, Lam


def pdas_solve(prob, init=None, max_outer=100, inner_tol=1e-10):
    """Primal-dual active set iteration.

    Returns (U, Lam, report); the outer loop stops when the increment norm
    drops below prob.eps_stop.  A repeated active set reproduces the same
    iterate, so stagnation triggers the stopping test within one sweep.
    """
    if init is None:
        U = prob.psi.copy()
        Lam = np.maximum(prob.apply(U) - prob.load, 0.0)
    else:
        U, Lam = init.U.copy(), init.Lam.copy()
    report = {"outer_iterations": 0, "active_sizes": [], "increments": [], "converged": False}
    for it in range(1, max_outer + 1):
        active = np.flatnonzero(Lam - prob.rho * (U - prob.psi) > 0)
        U_new, Lam_new = schur_step(prob, active, inner_tol=inner_tol)
        inc = prob.inc_norm(U_new - U)
        U, Lam = U_new, Lam_new
        report["outer_iterations"] = it
        report["active_sizes"].append(int(active.size))
        report["increments"].append(float(inc))
        if inc < prob.eps_stop:
            report["converged"] = True
            break
    else:
        raise ConvergenceFailure(
            "PDAS did not converge in %d outer iterations" % max_outer,
            residual=report["increments"][-1], iterations=max_outer,
        )
    scale = max(1.0, float(np.max(np.abs(prob.load))))
    report["complementarity_residual"] = float(np.max(np.abs(Lam * (U - prob.psi))) / scale)
    report["final_active_size"] = int(np.flatnonzero(Lam > 0).size)
    report["last_increment"] = report["increments"][-1]
    return U, Lam, report


def penalized_solve(prob, epsilon, F_plus, tol=1e-8, max_iter=20000):
    """Damped fixed-point solve of the penalized equation
    S U = F + M0 (F_plus . theta_eps(U - Psi)).

    F_plus is the nodal nonnegative part of the obstacle force.  The step
    size adapts: it halves whenever the fixed-point residual grows.
    """
    F_plus = np.asarray(F_plus, dtype=float)
    if np.any(F_plus < 0):
        raise ConfigurationError("F_plus must be componentwise nonnegative")
    if prob.mass0 is None:
        raise ConfigurationError("penalized solve needs the mass matrix (build via build_problem)")

    def step(U):
        rhs = prob.load + prob.mass0 @ (F_plus * theta_eps(U - prob.psi, epsilon))
        return prob.solve(rhs)

    U = prob.solve_load().copy()
    omega = 1.0
    scale = max(1.0, float(np.linalg.norm(prob.load)))
    res_prev = np.inf
    for _ in range(max_iter):
        T = step(U)
        res = float(np.linalg.norm(T - U)) / scale
        if res <= tol:
            return T
        # the undamped map oscillates when the penalty slope F_plus/eps is
        # steep; shrink the step until the residual decreases geometrically
        if res >= 0.9999 * res_prev:
            omega = max(0.5 * omega, 1e-4)
        res_prev = res
        U = (1.0 - omega) * U + omega * T
    raise ConvergenceFailure("penalized fixed point stalled", residual=res, iterations=max_iter)


def penalty_force(prob, Lchi, grad_chi, f, beta=None):
    """Nodal nonnegative part of the obstacle force
    max(iota*L(chi) + beta.grad(chi) + (-Laplace)^s_h(Psi) - f, 0),
    with the fractional term read off from the assembled quadratic form by
    inverting the mass matrix."""
    scheme = prob.meta.get("scheme")
    iota = prob.meta.get("iota", 0)
    if scheme is None:
        raise ConfigurationError("penalty_force needs a scheme-built problem")
    base = scheme.base
    pts = base.dof_coords
    ev = lambda fn: np.array([fn(*p) if base.mesh.dimension == 2 else fn(p[0]) for p in pts])
    frac = apply_fractional(scheme, prob.psi)
    frac_nodal = spla.spsolve(prob.mass0.tocsc(), frac)
    force = frac_nodal - ev(f)
    if iota:
        force = force + ev(Lchi)
    if beta is not None and np.any(np.asarray(beta, dtype=float) != 0):
        b = np.atleast_1d(np.asarray(beta, dtype=float))
        g = np.array([np.atleast_1d(grad_chi(*p) if base.mesh.dimension == 2 else grad_chi(p[0])) for p in pts])
        force = force + g @ b
    return np.maximum(force, 0.0)


def multiplier_sign_check(Lam, F_plus, tol=1e-8):
    """Report-only verification of the multiplier sign and the pointwise
    upper bound Lambda <= F_plus (informational)."""
    Lam = np.asarray(Lam, dtype=float)
    F_plus = np.asarray(F_plus, dtype=float)
    bad = np.flatnonzero(Lam < -tol)
    frac_ls = float(np.mean(Lam <= F_plus + tol)) if Lam.size else 1.0
    return {
        "passed": bad.size == 0,
        "min_multiplier": float(Lam.min()) if Lam.size else 0.0,
        "offending_index": int(bad[0]) if bad.size else None,
        "lewy_stampacchia_fraction": frac_ls,
    }
