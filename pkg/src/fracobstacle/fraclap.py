"""Sinc-quadrature realization of the integral fractional Laplacian.

The operator is approximated through its Balakrishnan (Dunford-Taylor)
integral: for each quadrature node y_j = j*k an elliptic problem is solved
on a truncated, exponentially graded extension of the base mesh, and the
weighted node contributions are summed.  Nodes with t = e^{-y/2} < 1 share
a single truncation radius (and hence a single extended space); nodes with
t >= 1 each get their own dilated domain.
"""

import math

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, NumericalError
from .fespace import FeSpace, assemble_mass, assemble_stiffness, extension_op
from .mesh import build_extended_mesh, dilation_radius

# cache per-node factorizations only while the extended spaces stay small;
# beyond this the Gram matrix path factors once per node and discards
_CACHE_DOF_LIMIT = 4000


def node_counts(s, k):
    """Quadrature extents (N-, N+) balancing the sinc truncation errors."""
    n_plus = math.ceil(math.pi**2 / (2.0 * k * k * (1.0 - s)))
    n_minus = math.ceil(math.pi**2 / (4.0 * s * k * k))
    return n_minus, n_plus


def normalization_c(d, s):
    """Constant c_{d,s} in the pointwise (principal value) definition of
    the fractional Laplacian of order s in d dimensions."""
    if d not in (1, 2):
        raise ConfigurationError("dimension must be 1 or 2")
    if not 0.0 < s < 1.0:
        raise ConfigurationError("fractional order s must lie in (0,1)")
    return 2.0 ** (2 * s) * s * math.gamma(s + d / 2.0) / (math.pi ** (d / 2.0) * math.gamma(1.0 - s))


class _NodeGroup:
    """Extended space shared by all quadrature nodes of one radius."""

    def __init__(self, radius, space, E, mass, stiff, node_ids):
        self.radius = radius
        self.space = space
        self.E = E
        self.mass = mass.tocsc()
        self.stiff = stiff.tocsc()
        self.mass_E = (mass @ E).tocsc()  # M_i E, ext x base
        self.stiff_E = (stiff @ E).tocsc()  # A_i E, ext x base
        self.node_ids = node_ids


class SincScheme:
    """Immutable quadrature scheme; per-node factorizations are cached
    lazily when the extended spaces are small enough.

    Beyond the truncation indices the node contributions approach closed
    forms (the resolvent tends to the identity for y -> -inf and to
    e^{-y} times the inverse-mass Laplacian for y -> +inf), so the two
    discarded geometric tails are added back exactly through the base mass
    and stiffness forms (tail_mass_coeff, tail_stiff_coeff)."""

    def __init__(self, s, k, M, base, y, t, weights, groups, group_of_node):
        self.s = s
        self.k = k
        self.M = M
        self.base = base
        self.y = y
        self.t = t
        self.weights = weights
        self.groups = groups
        self.group_of_node = group_of_node
        self.n_minus, self.n_plus = node_counts(s, k)
        pref = math.sin(math.pi * s) * k / math.pi
        self.tail_mass_coeff = pref * math.exp(-s * k * (self.n_minus + 1)) / (1.0 - math.exp(-s * k))
        self.tail_stiff_coeff = (
            pref * math.exp(-(1.0 - s) * k * (self.n_plus + 1)) / (1.0 - math.exp(-(1.0 - s) * k))
        )
        self.base_mass = assemble_mass(base).matrix
        self.base_stiff = assemble_stiffness(base).matrix
        self._cache_factors = max(g.space.dof_count for g in groups) <= _CACHE_DOF_LIMIT
        self._factors = {}

    @property
    def node_count(self):
        return self.y.size

    def node_index(self, j):
        """Position of signed node index j in the node arrays."""
        p = j + self.n_minus
        if not 0 <= p < self.node_count:
            raise ConfigurationError("node index %d outside [-%d, %d]" % (j, self.n_minus, self.n_plus))
        return p

    def _factor(self, p, group):
        if p in self._factors:
            return self._factors[p]
        t = self.t[p]
        # scale so the factored matrix stays O(1): t >= 1 can reach ~1e9
        if t < 1.0:
            mat = group.mass + (t * t) * group.stiff
        else:
            mat = group.stiff + (1.0 / (t * t)) * group.mass
        try:
            lu = spla.splu(mat)
        except RuntimeError as exc:
            raise NumericalError("factorization failed at quadrature node %d: %s" % (p - self.n_minus, exc))
        if self._cache_factors:
            self._factors[p] = lu
        return lu

    def _eta(self, p, group, stiff_Ev):
        """Solve (M_i + t^2 A_i) eta = t^2 A_i E v given A_i E v.

        eta = E v + xi with xi the truncated-resolvent correction; solving
        for eta directly avoids the cancellation E v + xi ~ O(t^2) at the
        strongly damped nodes.
        """
        t = self.t[p]
        rhs = (t * t) * stiff_Ev if t < 1.0 else stiff_Ev
        return self._factor(p, group).solve(rhs)

    def summary(self):
        return {
            "s": self.s,
            "k": self.k,
            "M": self.M,
            "node_count": int(self.node_count),
            "n_minus": int(self.n_minus),
            "n_plus": int(self.n_plus),
            "base_dofs": int(self.base.dof_count),
            "extended_dofs": [int(g.space.dof_count) for g in self.groups],
            "radii": [float(g.radius) for g in self.groups],
        }


def build_scheme(s, k, M, base, mesh_builder=build_extended_mesh):
    """Build the full quadrature scheme over the given base space.

    mesh_builder(base_mesh, radius) must return an extension of base's mesh
    out to the given radius.
    """
    if not 0.0 < s < 1.0:
        raise ConfigurationError("fractional order s must lie in (0,1)")
    if k <= 0 or M <= 0:
        raise ConfigurationError("quadrature spacing k and truncation M must be positive")
    if not isinstance(base, FeSpace):
        raise ConfigurationError("base must be a FeSpace")

    n_minus, n_plus = node_counts(s, k)
    j = np.arange(-n_minus, n_plus + 1)
    y = k * j.astype(float)
    t = np.exp(-0.5 * y)
    weights = (math.sin(math.pi * s) * k / math.pi) * np.exp(s * y)

    by_radius = {}
    for p in range(j.size):
        r = dilation_radius(t[p], M)
        by_radius.setdefault(round(r, 12), []).append(p)

    groups = []
    group_of_node = np.zeros(j.size, dtype=int)
    for r in sorted(by_radius):
        node_ids = by_radius[r]
        ext_mesh = mesh_builder(base.mesh, r)
        space = FeSpace(ext_mesh)
        E = extension_op(base, space)
        mass = assemble_mass(space).matrix
        stiff = assemble_stiffness(space).matrix
        groups.append(_NodeGroup(r, space, E, mass, stiff, node_ids))
        group_of_node[node_ids] = len(groups) - 1
    return SincScheme(s, k, M, base, y, t, weights, groups, group_of_node)


def node_solve(scheme, j, v):
    """Correction xi solving (M_i + t^2 A_i) xi = -M_i E v at node j."""
    p = scheme.node_index(j)
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ConfigurationError("node_solve input must be finite")
    g = scheme.groups[scheme.group_of_node[p]]
    Ev = g.E @ v
    return scheme._eta(p, g, g.stiff_E @ v) - Ev


def apply_fractional(scheme, v):
    """Matrix-free application of the fractional part of the system matrix.

    w' . apply_fractional(v) equals the fully discrete bilinear form in
    (v, w) for all base vectors w; the node sum is symmetric because each
    term is an SPD-inverse sandwiched between E' M_i and A_i E.
    """
    v = np.asarray(v, dtype=float)
    out = scheme.tail_mass_coeff * (scheme.base_mass @ v) + scheme.tail_stiff_coeff * (scheme.base_stiff @ v)
    for g in scheme.groups:
        stiff_Ev = g.stiff_E @ v
        acc = np.zeros(g.space.dof_count)
        for p in g.node_ids:
            acc += scheme.weights[p] * scheme._eta(p, g, stiff_Ev)
        out += g.mass_E.T @ acc
    return out


def dense_gram(scheme, max_block_elems=20_000_000):
    """Dense matrix of the fractional quadratic form on the base space.

    Each node operator is factored once and swept over blocks of basis
    vectors; blocks are sized so a dense right-hand-side panel stays below
    max_block_elems entries.
    """
    n = scheme.base.dof_count
    G = (scheme.tail_mass_coeff * scheme.base_mass + scheme.tail_stiff_coeff * scheme.base_stiff).toarray()
    for g in scheme.groups:
        ncols = int(max(1, min(n, max_block_elems // max(1, g.space.dof_count))))
        proj = g.mass_E.T.tocsr()  # E' M_i
        for p in g.node_ids:
            lu = scheme._factors.get(p) or scheme._factor(p, g)
            t = scheme.t[p]
            scale = t * t if t < 1.0 else 1.0
            w = scheme.weights[p]
            for c0 in range(0, n, ncols):
                rhs = (scale * g.stiff_E[:, c0 : c0 + ncols]).toarray()
                eta = lu.solve(rhs)
                G[:, c0 : c0 + ncols] += w * (proj @ eta)
    return G


def energy_norm(scheme, iota, stiff0, v):
    """Discrete energy norm sqrt(a_{s,h}(v,v) + iota * v' A0 v).

    stiff0 must be the pure Dirichlet (unit-coefficient) stiffness on the
    base space, regardless of the diffusion coefficient in the system.
    """
    if iota not in (0, 1):
        raise ConfigurationError("iota must be 0 or 1")
    v = np.asarray(v, dtype=float)
    q = float(v @ apply_fractional(scheme, v))
    if iota:
        q += float(v @ (stiff0 @ v))
    if q < -1e-12 * max(1.0, float(v @ v)):
        raise NumericalError("energy norm radicand is negative: %g (coercivity violation)" % q)
    return math.sqrt(max(q, 0.0))
