"""Independent brute-force references used only by tests.

The fractional bilinear form between two P1 hats on a uniform 1D mesh is
computed straight from its Fourier representation: with m = |i-j| and
sinc(x) = sin(x)/x,

    a_s(phi_i, phi_j) = (h^{1-2s}/pi) * J(m, s),
    J(m, s) = int_0^inf u^{2s} sinc^4(u/2) cos(m u) du.

The oscillatory tail is handled analytically: sin^4(u/2) expands into
cosines of frequencies m, m+-1, m+-2, each integrated against u^{2s-4}
over (cutoff, inf) with an alternating-series quadrature.

None of this shares code with the production assembly paths.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConvergenceFailure

_GLX, _GLW = np.polynomial.legendre.leggauss(20)


@dataclass
class FourierOracleConfig:
    cutoff: float = 60.0
    points_per_decade: int = 8
    stability_rel_tol: float = 1e-8


def _panel_quad(f, a, b):
    """Gauss-Legendre over linear panels [a_i, b_i] (vectorized)."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _GLX[None, :]
    return float(np.sum(half[:, None] * _GLW[None, :] * f(x)))


def _sinc4(u):
    return np.sinc(u / (2.0 * np.pi)) ** 4  # numpy sinc(x) = sin(pi x)/(pi x)


def _osc_tail(p, a, start):
    """int_start^inf u^p cos(a u) du by an alternating half-period series
    with Euler averaging (the terms alternate once aligned with the zeros
    of the cosine)."""
    z0 = (np.ceil(a * start / np.pi - 0.5) + 0.5) * np.pi / a
    f = lambda u: u**p * np.cos(a * u)
    head = _panel_quad(f, np.array([start]), np.array([z0])) if z0 > start else 0.0
    nterms = 48
    zeros = z0 + np.arange(nterms + 1) * np.pi / a
    terms = 0.5 * (zeros[1:] - zeros[:-1])[:, None] * _GLW[None, :] * f(
        0.5 * (zeros[1:] + zeros[:-1])[:, None] + 0.5 * (zeros[1:] - zeros[:-1])[:, None] * _GLX[None, :]
    )
    partial = np.cumsum(terms.sum(axis=1))
    while partial.size > 1:
        partial = 0.5 * (partial[1:] + partial[:-1])
    return head + float(partial[0])


def _tail(m, s, cutoff):
    """int_cutoff^inf u^{2s} sinc^4(u/2) cos(mu) du, analytically expanded."""
    # sin^4(u/2) = (3 - 4 cos u + cos 2u)/8 and product-to-sum on cos(mu)
    terms = {m: 3.0 / 8.0}
    for a, c in ((m - 1, -0.25), (m + 1, -0.25), (m - 2, 1.0 / 16.0), (m + 2, 1.0 / 16.0)):
        a = abs(a)
        terms[a] = terms.get(a, 0.0) + c
    total = 0.0
    p = 2 * s - 4
    for a, c in terms.items():
        if c == 0.0:
            continue
        if a == 0:
            total += c * cutoff ** (p + 1) / (-(p + 1))
        else:
            total += c * _osc_tail(p, a, cutoff)
    return 16.0 * total


def _J(m, s, cfg):
    def f(u):
        return u ** (2 * s) * _sinc4(u) * np.cos(m * u)

    # log-spaced panels resolve the u^{2s} behavior near zero
    nlog = max(4, cfg.points_per_decade) * 10  # 10 decades from 1e-10 to 1
    edges = np.logspace(-10.0, 0.0, nlog + 1)
    head = _panel_quad(f, edges[:-1], edges[1:])
    # linear panels up to the cutoff, several per oscillation period
    width = min(0.25, np.pi / (2.0 * (m + 2)))
    npan = int(np.ceil((cfg.cutoff - 1.0) / width))
    edges = np.linspace(1.0, cfg.cutoff, npan + 1)
    body = _panel_quad(f, edges[:-1], edges[1:])
    return head + body + _tail(m, s, cfg.cutoff)


_J_CACHE = {}


def exact_form_1d(i, j, mesh, s, cfg=None):
    """a_s(phi_i, phi_j) for interior hats i, j on a uniform 1D mesh."""
    if mesh.dimension != 1:
        raise ConfigurationError("exact_form_1d requires a 1D mesh")
    widths = mesh.cell_measures()
    if np.ptp(widths) > 1e-12 * widths.mean():
        raise ConfigurationError("exact_form_1d requires a uniform mesh")
    if not 0.0 < s < 1.0:
        raise ConfigurationError("fractional order s must lie in (0,1)")
    cfg = cfg or FourierOracleConfig()
    h = float(widths.mean())
    m = abs(int(i) - int(j))
    key = (m, round(s, 14), cfg.cutoff, cfg.points_per_decade)
    if key not in _J_CACHE:
        val = _J(m, s, cfg)
        wide = FourierOracleConfig(2.0 * cfg.cutoff, cfg.points_per_decade, cfg.stability_rel_tol)
        check = _J(m, s, wide)
        scale = max(abs(val), abs(check), 1e-3)
        if abs(val - check) > cfg.stability_rel_tol * scale:
            raise ConfigurationError(
                "Fourier tail not converged at cutoff %g: %g vs %g" % (cfg.cutoff, val, check)
            )
        _J_CACHE[key] = val
    return h ** (1.0 - 2.0 * s) / np.pi * _J_CACHE[key]


def dense_obstacle_solve(S, F, psi, tol=1e-12, max_iter=200_000):
    """Projected SOR solve of the dense obstacle problem; returns (U, Lam)
    with Lam = S U - F >= 0 and complementarity exact to tol."""
    S = np.asarray(S, dtype=float)
    F = np.asarray(F, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = S.shape[0]
    if n > 200:
        raise ConfigurationError("dense oracle limited to 200 DoFs")
    d = np.diag(S)
    if np.any(d <= 0):
        raise ConfigurationError("dense oracle needs positive diagonal")
    U = np.maximum(psi, 0.0)
    omega = 1.3
    for _ in range(max_iter):
        delta = 0.0
        for i in range(n):
            r = F[i] - S[i] @ U
            u_new = max(psi[i], U[i] + omega * r / d[i])
            delta = max(delta, abs(u_new - U[i]))
            U[i] = u_new
        if delta <= tol:
            Lam = S @ U - F
            comp = np.max(np.abs(np.minimum(U - psi, Lam)))
            if comp <= 100 * tol * max(1.0, np.max(np.abs(F))):
                return U, Lam
    raise ConvergenceFailure("projected SOR did not converge", residual=delta, iterations=max_iter)
