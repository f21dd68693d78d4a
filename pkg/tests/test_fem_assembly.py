import numpy as np
import pytest
from numpy.testing import assert_allclose

from finvisc import constitutive as cm
from finvisc.errors import InvalidDeformationError
from finvisc.fem import (Assembler, BVPConfig, DirichletBC, TractionBC, generate_cube_mesh,
                         generate_shell_mesh, outer_pressure_fe, shell_config)
from finvisc.fem import assembly
from finvisc.fem.solver import FEState, initial_state
from finvisc.shell import ShellGeometry
from finvisc.tensors import IDENTITY6, mat_to_sym, random_unimodular_spd


def clamped(mesh, params, **kw):
    bcs = [DirichletBC(mesh.nodes_on("z0"), k) for k in range(3)]
    return BVPConfig(mesh, params, bcs, [0.0, 1.0], **kw)


def affine_state(asm, F, q):
    z = np.zeros(asm.dofs.n)
    z[:asm.dofs.n_u] = (asm.mesh.X @ (F - np.eye(3)).T).reshape(-1)
    z[asm.dofs.n_u:] = q
    return z


def random_Dv(rng, n):
    return np.array([mat_to_sym(random_unimodular_spd(rng, 0.2)) for _ in range(n)])


@pytest.mark.parametrize("fixture", ["params_soft", "params", "params_inc"])
def test_reference_state_has_zero_residual(fixture, request):
    mesh = generate_cube_mesh(1, distort=0.1)
    asm = Assembler(clamped(mesh, request.getfixturevalue(fixture)))
    s = initial_state(asm)
    R, _ = asm.assemble(s.z, s.qp.Dv, 0.0, tangent=False)
    assert_allclose(R, 0.0, atol=1e-13)


@pytest.mark.parametrize("fixture", ["params_soft", "params_inc"])
def test_tangent_matches_finite_differences(fixture, request, rng):
    params = request.getfixturevalue(fixture)
    mesh = generate_cube_mesh(1, distort=0.15, seed=1)
    asm = Assembler(clamped(mesh, params))
    z = 0.05 * rng.standard_normal(asm.dofs.n)
    z[asm.dofs.n_u:] = rng.standard_normal(asm.dofs.n_q)
    Dv = random_Dv(rng, mesh.n_elements * asm.nq)
    _, K = asm.assemble(z, Dv, 1.0)
    K = K.toarray()
    free = asm.dofs.free
    h = 1e-6
    fd = np.empty_like(K)
    for j, d in enumerate(free):
        zp, zm = z.copy(), z.copy()
        zp[d] += h
        zm[d] -= h
        fd[:, j] = (asm.assemble(zp, Dv, 1.0, tangent=False)[0][free]
                    - asm.assemble(zm, Dv, 1.0, tangent=False)[0][free]) / (2 * h)
    scale = np.max(np.abs(K))
    assert np.max(np.abs(K - fd)) / scale < 1e-6
    assert np.max(np.abs(K - K.T)) / scale < 1e-14


def test_tangent_times_increment(params_soft, rng):
    mesh = generate_cube_mesh(1)
    asm = Assembler(clamped(mesh, params_soft))
    z = 0.02 * rng.standard_normal(asm.dofs.n)
    dz = np.zeros(asm.dofs.n)
    dz[asm.dofs.free] = 1e-3 * rng.standard_normal(asm.dofs.n_free)
    Dv = random_Dv(rng, mesh.n_elements * asm.nq)
    R, K, Kdz = asm.assemble(z, Dv, 1.0, dz=dz)
    assert_allclose(Kdz[asm.dofs.free], K @ dz[asm.dofs.free], rtol=1e-12,
                    atol=1e-14 * np.abs(Kdz).max())


def test_homogeneous_state_has_no_interior_force(params_soft):
    mesh = generate_cube_mesh(2, distort=0.15, seed=2)
    asm = Assembler(clamped(mesh, params_soft))
    F = np.array([[1.2, 0.1, 0.0], [0.0, 0.9, 0.05], [0.0, 0.0, 1.1]])
    q = params_soft.kappa * (np.linalg.det(F) - 1.0)
    z = affine_state(asm, F, q)
    R, _ = asm.assemble(z, np.tile(IDENTITY6, (mesh.n_elements * asm.nq, 1)), 0.0,
                        tangent=False)
    boundary = np.unique(np.concatenate([mesh.nodes_on(k) for k in mesh.facet_sets]))
    interior = np.setdiff1d(np.arange(mesh.n_nodes), boundary)
    assert interior.size > 0
    Ru = R[:asm.dofs.n_u].reshape(-1, 3)
    S = cm.piola_stress_hybrid(F, IDENTITY6, q, params_soft)
    assert np.max(np.abs(Ru[interior])) < 1e-12 * np.abs(S).max()
    assert_allclose(R[asm.dofs.n_u:], 0.0, atol=1e-12)
    # boundary forces sum to zero for a uniform stress
    assert_allclose(Ru.sum(axis=0), 0.0, atol=1e-12 * np.abs(S).max())


def test_constant_traction_integrates_to_area(params_soft):
    mesh = generate_cube_mesh(2, distort=0.1)
    cfg = clamped(mesh, params_soft, tractions=[TractionBC("x1", lambda t, X: np.tile(
        [2.0 * t, 0.0, -1.0], (len(X), 1)))])
    f = Assembler(cfg).external_force(0.5).reshape(-1)[:3 * mesh.n_nodes].reshape(-1, 3)
    assert_allclose(f.sum(axis=0), [1.0, 0.0, -1.0], atol=1e-14)


def test_body_force_integrates_to_volume(params_soft):
    mesh = generate_cube_mesh(1, distort=0.1)
    cfg = clamped(mesh, params_soft, body_force=lambda X: np.tile([0.0, 0.0, 3.0], (len(X), 1)))
    f = Assembler(cfg).external_force(0.0)[:3 * mesh.n_nodes].reshape(-1, 3)
    assert_allclose(f.sum(axis=0), [0.0, 0.0, 3.0], atol=1e-14)


def test_thread_count_does_not_change_assembly(params_soft, rng, monkeypatch):
    monkeypatch.setattr(assembly, "_CHUNK", 7)
    mesh = generate_cube_mesh(2, distort=0.1)
    out = []
    z = 0.02 * rng.standard_normal(3 * mesh.n_nodes + mesh.n_vertices)
    for threads in (1, 4):
        asm = Assembler(clamped(mesh, params_soft, threads=threads))
        R, K = asm.assemble(z, np.tile(IDENTITY6, (mesh.n_elements * asm.nq, 1)), 1.0)
        out.append((R, K.toarray()))
    assert np.array_equal(out[0][0], out[1][0])
    assert np.array_equal(out[0][1], out[1][1])


def test_inverted_element_raises(params_soft):
    mesh = generate_cube_mesh(1)
    asm = Assembler(clamped(mesh, params_soft))
    z = affine_state(asm, np.diag([1.0, 1.0, -0.5]), 0.0)
    with pytest.raises(InvalidDeformationError):
        asm.assemble(z, np.tile(IDENTITY6, (mesh.n_elements * asm.nq, 1)), 0.0)


def test_config_validation(params_soft):
    mesh = generate_cube_mesh(1)
    with pytest.raises(ValueError):
        BVPConfig(mesh, params_soft, [], [0.0, 1.0])
    with pytest.raises(ValueError):
        BVPConfig(mesh, params_soft, [DirichletBC(mesh.nodes_on("z0"), 2)], [0.0, 0.0])


def test_outer_pressure_of_uniform_dilation(params_soft):
    """Uniform dilation gives a uniform isotropic stress; P_h recovers it up to
    the polynomial approximation of the sphere, which shrinks with refinement."""
    geom = ShellGeometry.ramp(0.9, 1.0, 0.05, 10.0)
    s_ = 1.05
    F = s_ * np.eye(3)
    q = params_soft.kappa * (s_ ** 3 - 1.0)
    S = cm.piola_stress_hybrid(F, IDENTITY6, q, params_soft)[0, 0]
    errs = []
    for nt in (1, 2, 4):
        mesh = generate_shell_mesh(1, nt)
        asm = Assembler(shell_config(mesh, params_soft, geom, [0.0, 1.0]))
        s = initial_state(asm)
        nf = len(s.facet_F["outer"])
        st = FEState(1.0, affine_state(asm, F, q), s.qp, s.F,
                     {"outer": np.tile(F, (nf, 1, 1))})
        errs.append(abs(outer_pressure_fe(asm, st) / S - 1.0))
    assert errs[0] < 2e-3
    assert errs[0] > errs[1] > errs[2]
