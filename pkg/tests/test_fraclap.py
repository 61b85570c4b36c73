import math

import numpy as np
import pytest

from fracobstacle.errors import ConfigurationError
from fracobstacle.fespace import FeSpace, assemble_stiffness
from fracobstacle.fraclap import (
    apply_fractional,
    build_scheme,
    dense_gram,
    energy_norm,
    node_counts,
    node_solve,
    normalization_c,
)
from fracobstacle.mesh import build_base_mesh


@pytest.fixture(scope="module")
def scheme_1d():
    base = FeSpace(build_base_mesh("interval", 3))
    return build_scheme(0.5, 0.2, 5.0, base)


def test_node_counts_balance():
    assert node_counts(0.5, 0.2) == (124, 247)
    assert node_counts(0.3, 0.2) == (206, 177)
    # halving k roughly quadruples both extents
    nm, np_ = node_counts(0.5, 0.1)
    assert nm == 494 and np_ == 987


def test_normalization_constant_closed_forms():
    assert normalization_c(1, 0.5) == pytest.approx(1.0 / math.pi, rel=1e-14)
    assert normalization_c(2, 0.5) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-14)
    with pytest.raises(ConfigurationError):
        normalization_c(3, 0.5)
    with pytest.raises(ConfigurationError):
        normalization_c(1, 1.0)


def test_build_scheme_validation():
    base = FeSpace(build_base_mesh("interval", 1))
    with pytest.raises(ConfigurationError):
        build_scheme(1.5, 0.2, 5.0, base)
    with pytest.raises(ConfigurationError):
        build_scheme(0.5, -0.1, 5.0, base)
    with pytest.raises(ConfigurationError):
        build_scheme(0.5, 0.2, 5.0, base.mesh)


def test_scheme_structure(scheme_1d):
    s = scheme_1d
    assert s.node_count == s.n_minus + s.n_plus + 1
    assert np.all(np.diff(s.y) > 0)
    assert s.weights[s.node_index(0)] == pytest.approx(math.sin(math.pi * 0.5) * 0.2 / math.pi)
    # all damped nodes (t <= 1) share the fixed radius 2 + M
    radii = {g.radius for g in s.groups}
    assert (2.0 + s.M) in radii
    # undamped nodes get strictly larger, t-dependent radii
    assert max(radii) > 2.0 + s.M
    summary = s.summary()
    assert summary["node_count"] == s.node_count
    with pytest.raises(ConfigurationError):
        s.node_index(10**6)


def test_node_solve_residual_equation(scheme_1d, rng):
    """xi from node_solve satisfies (M + t^2 A) xi = -M E v.

    The residual is checked in the O(1)-scaled form that matches the
    conditioning of each node (divide by t^2 when t >= 1)."""
    s = scheme_1d
    v = rng.standard_normal(s.base.dof_count)
    for j in (-s.n_minus, -3, 0, 5, s.n_plus):
        p = s.node_index(j)
        g = s.groups[s.group_of_node[p]]
        t = s.t[p]
        xi = node_solve(s, j, v)
        Ev = g.E @ v
        if t < 1.0:
            res = (g.mass + t * t * g.stiff) @ xi + g.mass @ Ev
            scale = np.linalg.norm(g.mass @ Ev) + 1.0
        else:
            res = (g.stiff + g.mass / (t * t)) @ xi + (g.mass @ Ev) / (t * t)
            scale = np.linalg.norm(g.stiff @ Ev) + 1.0
        assert np.linalg.norm(res) < 1e-10 * scale


def test_node_solve_rejects_bad_input(scheme_1d):
    with pytest.raises(ConfigurationError):
        node_solve(scheme_1d, 0, np.full(scheme_1d.base.dof_count, np.nan))


def test_apply_is_symmetric_form(scheme_1d, rng):
    n = scheme_1d.base.dof_count
    for _ in range(5):
        v = rng.standard_normal(n)
        w = rng.standard_normal(n)
        a = float(w @ apply_fractional(scheme_1d, v))
        b = float(v @ apply_fractional(scheme_1d, w))
        assert a == pytest.approx(b, rel=1e-12, abs=1e-13)


def test_dense_gram_matches_apply(scheme_1d, rng):
    G = dense_gram(scheme_1d)
    v = rng.standard_normal(scheme_1d.base.dof_count)
    assert np.allclose(G @ v, apply_fractional(scheme_1d, v), rtol=1e-12, atol=1e-13)


def test_dense_gram_positive_definite_2d():
    base = FeSpace(build_base_mesh("square", 1))
    scheme = build_scheme(0.5, 0.4, 3.0, base)
    G = dense_gram(scheme)
    assert np.allclose(G, G.T, rtol=1e-10, atol=1e-12)
    assert np.linalg.eigvalsh(G).min() > 0


def test_truncation_tail_coefficients_small(scheme_1d):
    # at production spacing the end corrections are far below the form scale
    assert 0 < scheme_1d.tail_mass_coeff < 1e-4
    assert 0 < scheme_1d.tail_stiff_coeff < 1e-4


def test_quadrature_refinement_converges():
    """Halving k changes the form by far less than the first halving did."""
    base = FeSpace(build_base_mesh("interval", 2))
    v = FeSpace(base.mesh).interpolate(lambda x: 1.0 - x * x)
    vals = []
    for k in (0.8, 0.4, 0.2):
        sch = build_scheme(0.5, k, 5.0, base)
        vals.append(float(v @ apply_fractional(sch, v)))
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 < 0.5 * d1


def test_energy_norm_definition(scheme_1d, rng):
    stiff0 = assemble_stiffness(scheme_1d.base)
    v = rng.standard_normal(scheme_1d.base.dof_count)
    e0 = energy_norm(scheme_1d, 0, stiff0, v)
    e1 = energy_norm(scheme_1d, 1, stiff0, v)
    frac = float(v @ apply_fractional(scheme_1d, v))
    assert e0 == pytest.approx(math.sqrt(frac), rel=1e-12)
    assert e1 == pytest.approx(math.sqrt(frac + float(v @ (stiff0 @ v))), rel=1e-12)
    assert energy_norm(scheme_1d, 0, stiff0, np.zeros_like(v)) == 0.0
    with pytest.raises(ConfigurationError):
        energy_norm(scheme_1d, 2, stiff0, v)
