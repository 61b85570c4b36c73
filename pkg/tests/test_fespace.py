import numpy as np
import pytest

from fracobstacle.errors import AssemblyError, ConfigurationError
from fracobstacle.fespace import (
    FeSpace,
    assemble_advection,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    extension_op,
    restriction_op,
)
from fracobstacle.mesh import build_base_mesh, build_extended_mesh


def test_interval_dof_count_and_coords():
    for level in range(4):
        sp_ = FeSpace(build_base_mesh("interval", level))
        assert sp_.dof_count == 2 * 2**level - 1
        assert np.all(np.abs(sp_.dof_coords[:, 0]) < 1.0)


def test_extended_space_keeps_domain_boundary_free():
    base = build_base_mesh("interval", 2)
    ext = FeSpace(build_extended_mesh(base, 7.0))
    # only the outer truncation boundary is constrained
    coords = ext.dof_coords[:, 0]
    assert np.any(np.abs(np.abs(coords) - 1.0) < 1e-14)
    assert np.all(np.abs(coords) < 7.0)


def test_stiffness_1d_exact_entries(interval_space):
    h = 2.0 / interval_space.mesh.num_cells
    A = assemble_stiffness(interval_space).toarray()
    assert np.allclose(np.diag(A), 2.0 / h)
    assert np.allclose(np.diag(A, 1), -1.0 / h)
    assert np.allclose(A, A.T)


def test_stiffness_coefficient_scaling(interval_space):
    A1 = assemble_stiffness(interval_space).toarray()
    A2 = assemble_stiffness(interval_space, coeff_A=2.0).toarray()
    M = assemble_mass(interval_space).toarray()
    Ac = assemble_stiffness(interval_space, coeff_c=1.0).toarray()
    assert np.allclose(A2, 2.0 * A1)
    assert np.allclose(Ac, A1 + M)


def test_stiffness_rejects_bad_coefficients(square_space):
    with pytest.raises(AssemblyError):
        assemble_stiffness(square_space, coeff_A=np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(AssemblyError):
        assemble_stiffness(square_space, coeff_A=-1.0)
    with pytest.raises(AssemblyError):
        assemble_stiffness(square_space, coeff_c=-1.0)


def test_stiffness_2d_energy_of_quadratic(square_space):
    # interpolant of u = (1/4 - x^2)(1/4 - y^2), which vanishes on the whole
    # boundary; its Dirichlet energy is 2 * (1/3) * (1/30) = 1/45
    vals = []
    for level in (2, 3, 4):
        sp_ = FeSpace(build_base_mesh("square", level))
        u = sp_.interpolate(lambda x, y: (0.25 - x * x) * (0.25 - y * y))
        A = assemble_stiffness(sp_)
        vals.append(float(u @ (A @ u)))
    errs = np.abs(np.array(vals) - 1.0 / 45.0)
    assert errs[-1] < errs[0]
    assert errs[-1] < 2e-4


def test_mass_matrix_1d_entries(interval_space):
    h = 2.0 / interval_space.mesh.num_cells
    M = assemble_mass(interval_space).toarray()
    assert np.allclose(np.diag(M), 2.0 * h / 3.0)
    assert np.allclose(np.diag(M, 1), h / 6.0)
    assert np.all(np.linalg.eigvalsh(M) > 0)


def test_mass_total_area(square_space):
    # quadratic form of the all-ones vector = area covered by interior hats
    M = assemble_mass(square_space)
    ones = np.ones(square_space.dof_count)
    total = float(ones @ (M @ ones))
    assert 0 < total < 1.0


def test_advection_skew_on_interior(interval_space, rng):
    B = assemble_advection(interval_space, [0.5]).toarray()
    assert np.allclose(B, -B.T, atol=1e-14)
    v = rng.standard_normal(interval_space.dof_count)
    assert abs(v @ (B @ v)) <= 1e-12 * max(1.0, np.linalg.norm(B @ v) * np.linalg.norm(v))


def test_advection_2d_constant_drift_skew(square_space, rng):
    B = assemble_advection(square_space, [0.3, -0.7]).toarray()
    v = rng.standard_normal(square_space.dof_count)
    assert abs(v @ (B @ v)) <= 1e-12 * max(1.0, np.linalg.norm(B @ v) * np.linalg.norm(v))


def test_load_vector_constant(interval_space):
    h = 2.0 / interval_space.mesh.num_cells
    F = assemble_load(interval_space, 1.0)
    assert np.allclose(F, h)  # interior hats all have unit-coefficient mass h
    assert F.sum() == pytest.approx(2.0 - h)


def test_load_vector_linear_exact(interval_space):
    # (x+2, phi_i) = h * (x_i + 2) for interior hats on a uniform mesh
    F = assemble_load(interval_space, lambda x: x + 2.0)
    h = 2.0 / interval_space.mesh.num_cells
    assert np.allclose(F, h * (interval_space.dof_coords[:, 0] + 2.0))


def test_eval_matrix_reproduces_coarse_functions():
    # 1 - |x| is piecewise linear on every coarse cell and vanishes at the
    # Dirichlet boundary, so nested-space injection reproduces it exactly
    coarse = FeSpace(build_base_mesh("interval", 2))
    fine = FeSpace(build_base_mesh("interval", 4))
    P = coarse.eval_matrix(fine.dof_coords)
    u = coarse.interpolate(lambda x: 1.0 - abs(x))
    assert np.allclose(P @ u, fine.interpolate(lambda x: 1.0 - abs(x)))


def test_eval_matrix_2d_bilinear():
    # piecewise bilinear on the coarse grid lines, zero on the boundary
    fn = lambda x, y: (1.0 - 2.0 * abs(x)) * (1.0 - 2.0 * abs(y))
    coarse = FeSpace(build_base_mesh("square", 1))
    fine = FeSpace(build_base_mesh("square", 3))
    P = coarse.eval_matrix(fine.dof_coords)
    assert np.allclose(P @ coarse.interpolate(fn), fine.interpolate(fn))


def test_eval_matrix_outside_point(interval_space):
    with pytest.raises(ConfigurationError):
        interval_space.eval_matrix(np.array([[3.0]]))


def test_extension_restriction_identity():
    base = FeSpace(build_base_mesh("interval", 3))
    ext = FeSpace(build_extended_mesh(base.mesh, 7.0))
    E = extension_op(base, ext)
    R = restriction_op(base, ext)
    v = np.linspace(1.0, 2.0, base.dof_count)
    assert np.allclose(R @ (E @ v), v)
    w = E @ v
    # zero extension: everything outside the base vertex block vanishes
    outside = np.abs(ext.dof_coords[:, 0]) > 1.0 + 1e-12
    assert np.allclose(w[outside], 0.0)


def test_extension_requires_matching_meshes():
    a = FeSpace(build_base_mesh("interval", 2))
    b = FeSpace(build_base_mesh("interval", 3))
    with pytest.raises(ConfigurationError):
        extension_op(a, b)


def test_sparse_operator_interface(interval_space):
    A = assemble_stiffness(interval_space)
    assert A.symmetric
    assert A.rows == A.cols == interval_space.dof_count
    v = np.ones(A.cols)
    assert np.allclose(A.matvec(v), A @ v)
