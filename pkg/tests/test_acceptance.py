"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every test checks its accuracy bound and its wall-time budget.  Run
``pytest tests/test_acceptance.py -v -s`` to see only these lines.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from finvisc import constitutive as cm
from finvisc.evolution import RKStepInput, advance, rk5_step
from finvisc.fem import (convergence_study, generate_cube_mesh, homogeneity,
                         patch_test_config, run)
from finvisc.material import vhb4910
from finvisc.matpoint import LoadProgram, run_uniaxial_stress
from finvisc.shell import (GaussGrid, ShellGeometry, evolve_shell_state, lambda_field,
                           pressure_history)
from finvisc.tensors import (IDENTITY6, det_sym, mat_to_sym, random_deformation,
                             random_rotation, random_unimodular_spd, sym_to_mat)

import oracles

KAPPA_SOFT = 14.62
KAPPA_NEAR = 146200.0
PEAK, RATE = 3.0, 0.05


@contextmanager
def criterion(capsys, number, title, budget_s):
    """Time the block, enforce the budget and print one verdict line."""
    info = {}
    t0 = time.perf_counter()
    try:
        yield info
        elapsed = time.perf_counter() - t0
        if elapsed > budget_s:
            raise AssertionError(f"runtime {elapsed:.1f} s exceeds {budget_s} s")
    except BaseException as exc:
        elapsed = time.perf_counter() - t0
        with capsys.disabled():
            print(f"\n[FAIL] criterion {number}: {title} ({elapsed:.1f} s) {exc}")
        raise
    with capsys.disabled():
        detail = ", ".join(f"{k} = {v}" for k, v in info.items())
        print(f"\n[PASS] criterion {number}: {title} ({elapsed:.1f} s) {detail}")


def test_1_determinant_preservation(capsys):
    params = vhb4910(KAPPA_NEAR)
    prog = LoadProgram.cycle(PEAK, RATE, mode="prescribed")
    n = 10_000
    times = np.linspace(0.0, prog.end_time, n + 1)
    with criterion(capsys, 1, "unit determinant of Dv over 1e4 RK steps", 5.0) as info:
        Fs = [prog.F(t) for t in times]
        D = IDENTITY6.copy()
        worst = 0.0
        for k in range(n):
            D = rk5_step(RKStepInput(Fs[k], Fs[k + 1], D, times[k + 1] - times[k]), params)
            worst = max(worst, abs(det_sym(D) - 1.0))
        info["max |det Dv - 1|"] = f"{worst:.2e}"
        assert worst <= 1e-12


def test_2_integrator_order(capsys):
    # starts from Dv = I under a finite stretch; the viscosity is not smooth
    # at the rest state, which would hide the order of the scheme
    params = vhb4910(KAPPA_NEAR)
    tau = cm.time_scale(np.eye(3), np.eye(3), params)
    F_of_t = lambda t: np.diag([1.0, 1.0, 1.5 + RATE * t])
    window = 0.25 * tau
    with criterion(capsys, 2, "observed order of the RK step", 10.0) as info:
        finals = []
        for m in (100, 200, 400, 800):
            n = int(round(0.25 * m))
            dt = window / n
            D = IDENTITY6.copy()
            for k in range(n):
                D = rk5_step(RKStepInput(F_of_t(k * dt), F_of_t((k + 1) * dt), D, dt), params)
            finals.append(D)
        err = [np.max(np.abs(finals[i] - finals[i + 1])) for i in range(3)]
        orders = [math.log2(err[i] / err[i + 1]) for i in range(2)]
        info["orders"] = ", ".join(f"{o:.3f}" for o in orders)
        assert all(4.5 <= o <= 5.5 for o in orders)


def test_3_tangent_consistency(capsys):
    rng = np.random.default_rng(3)
    with criterion(capsys, 3, "spatial tangent vs central differences", 5.0) as info:
        worst = 0.0
        for k in range(100):
            params = vhb4910(KAPPA_SOFT if k % 2 else math.inf)
            F = random_deformation(rng, 0.3)
            Dv = random_unimodular_spd(rng, 0.25)
            L = cm.tangent_moduli(F, Dv, params=params, q=0.0).L
            L_fd = oracles.fd_tangent(F, Dv, params)
            worst = max(worst, np.max(np.abs(L - L_fd)) / np.max(np.abs(L)))
        info["max relative error"] = f"{worst:.2e}"
        assert worst <= 1e-6


def test_4_viscosity_limits(capsys):
    params = vhb4910(KAPPA_NEAR)
    with criterion(capsys, 4, "hyperelastic limits of the viscosity", 10.0) as info:
        # fast relaxation: the lag behind equilibrium scales with the rate
        # over the viscosity, so a quick ramp with stable large sub-steps
        fast = params.scale_viscosity(1e-8)
        tr = run_uniaxial_stress(LoadProgram.ramp(PEAK, 1.0, mode="uniaxial"), fast, 0.05,
                                 safety=50.0)
        ref = np.array([cm.hyperelastic_piola(F, fast)[2, 2] for F in tr.F])
        e_fast = np.max(np.abs(tr.S33[1:] / ref[1:] - 1.0))
        slow = params.scale_viscosity(1e8)
        tr = run_uniaxial_stress(LoadProgram.ramp(PEAK, RATE, mode="uniaxial"), slow, 0.5)
        ref = np.array([cm.hyperelastic_piola(F, slow, include_neq=True)[2, 2] for F in tr.F])
        e_slow = np.max(np.abs(tr.S33[1:] / ref[1:] - 1.0))
        info["eta x 1e-8"] = f"{e_fast:.2e}"
        info["eta x 1e8"] = f"{e_slow:.2e}"
        assert e_fast <= 1e-4 and e_slow <= 1e-4


def test_5_material_point_oracle(capsys):
    params = vhb4910(KAPPA_NEAR)
    prog = LoadProgram.cycle(PEAK, RATE)
    with criterion(capsys, 5, "uniaxial cycle vs monolithic ODE oracle", 30.0) as info:
        tr = run_uniaxial_stress(prog, params, 0.05, record_every=1.0)
        lat, S33 = oracles.uniaxial_oracle(prog.F33, tr.t, params,
                                           breaks=prog.breakpoints())
        rel = np.abs(tr.S33[1:] - S33[1:]) / np.abs(S33[1:])
        work = tr.dissipated_work()
        peak = int(np.argmax(tr.F33))
        up = np.interp(2.0, tr.F33[:peak + 1], tr.S33[:peak + 1])
        down = np.interp(2.0, tr.F33[peak:][::-1], tr.S33[peak:][::-1])
        info["max relative error"] = f"{rel.max():.2e}"
        info["dissipated work"] = f"{work:.3f} kPa"
        assert rel.max() <= 1e-5
        assert work >= 0.0 and up > down
        assert np.all(tr.dissipation >= 0.0)


def test_6_patch_test(capsys):
    prog = LoadProgram.cycle(PEAK, RATE)
    with criterion(capsys, 6, "patch test on two distorted cube meshes", 120.0) as info:
        for kappa, tol in ((KAPPA_SOFT, 1e-8), (KAPPA_NEAR, 1e-7)):
            params = vhb4910(kappa)
            ref = run_uniaxial_stress(prog, params, 2.0, tol1=1e-12, tol2=1e-12)
            for n in (1, 2):
                mesh = generate_cube_mesh(n, distort=0.15, seed=0)
                cfg = patch_test_config(mesh, params, prog, 2.0, tol1=1e-10, tol2=1e-10)
                asm, states = run(cfg)
                hom = max(homogeneity(asm, s) for s in states)
                S33 = []
                for s in states:
                    S, _, _ = asm.stress(s.F, s.qp.Dv, asm.pressure(s.z).reshape(-1),
                                         asm.group, False)
                    S33.append(S[:, 2, 2].mean())
                err = np.max(np.abs(np.array(S33) - ref.S33)) / np.max(np.abs(ref.S33))
                info[f"kappa {kappa:g}, n {n}"] = f"affine {hom:.1e} S33 {err:.1e}"
                assert hom <= 1e-8
                assert err <= tol


def test_7_shell_exact_solution(capsys):
    params = vhb4910()
    A, B = 0.9, 1.0
    geom = ShellGeometry.ramp(A, B, RATE, 10.0)
    times = np.linspace(0.0, 10.0, 201)
    with criterion(capsys, 7, "shell solution: quadrature and viscous stretch", 10.0) as info:
        P100 = pressure_history(times, geom, params, 100)[-1]
        P400 = pressure_history(times, geom, params, 400)[-1]
        dP = abs(P100 - P400) / abs(P400)
        grid = GaussGrid(np.array([A, 0.95, B]), np.zeros(3))
        hist = evolve_shell_state(grid, times, geom, params)
        worst = 0.0
        for i, R in enumerate(grid.R):
            ref = oracles.shell_lv_oracle(lambda t: lambda_field(R, t, geom), times, params)
            worst = max(worst, np.max(np.abs(hist[:, i] / ref - 1.0)))
        info["P(10 s)"] = f"{P400:.9f} kPa"
        info["n=100 vs 400"] = f"{dP:.1e}"
        info["lambda_v error"] = f"{worst:.1e}"
        assert geom.b(10.0) == pytest.approx(1.5)
        assert dP < 1e-8
        assert worst <= 1e-9


@pytest.mark.slow
def test_8_fem_convergence(capsys):
    levels = ((1, 2), (2, 3), (3, 4))
    with criterion(capsys, 8, "FE shell pressure converges to the exact one", 1800.0) as info:
        rows, ref = convergence_study(levels, vhb4910(), rate=RATE, t_end=10.0, n_steps=10)
        eps = [r.eps_P for r in rows]
        for r in rows:
            info[f"{r.n_dof} dofs"] = f"{r.eps_P:.2e}"
        assert all(a > b for a, b in zip(eps, eps[1:]))
        assert eps[-1] < 1e-2 and rows[-1].n_dof <= 50_000


def test_9_physics_invariants(capsys):
    params = vhb4910(KAPPA_NEAR)
    rng = np.random.default_rng(9)
    n = 1000
    F = np.array([random_deformation(rng, 0.3) for _ in range(n)])
    D = np.array([mat_to_sym(random_unimodular_spd(rng, 0.25)) for _ in range(n)])
    with criterion(capsys, 9, "invariants at 1000 random states", 30.0) as info:
        J = np.linalg.det(F)
        worst = dict(frame=0.0, isotropy=0.0, symmetry=0.0)
        for k in range(n):
            Q = random_rotation(rng)
            Dk = sym_to_mat(D[k])
            T = sym_to_mat(cm.cauchy_stress_umat(F[k], D[k], J[k], params)[0])
            scale = np.max(np.abs(T)) + 1.0
            TQ = sym_to_mat(cm.cauchy_stress_umat(Q @ F[k], D[k], J[k], params)[0])
            worst["frame"] = max(worst["frame"], np.max(np.abs(TQ - Q @ T @ Q.T)) / scale)
            TI = sym_to_mat(cm.cauchy_stress_umat(Q @ F[k] @ Q.T, mat_to_sym(Q @ Dk @ Q.T),
                                                  J[k], params)[0])
            worst["isotropy"] = max(worst["isotropy"], np.max(np.abs(TI - Q @ T @ Q.T)) / scale)
            SFt = cm.piola_stress_compressible(F[k], D[k], params) @ F[k].T
            worst["symmetry"] = max(worst["symmetry"], np.max(np.abs(SFt - SFt.T)) / scale)
        diss = np.array([cm.dissipation_rate(F[k], D[k], params) for k in range(n)])
        assert max(worst.values()) < 1e-10
        assert np.all(diss >= 0.0)

        # hold every state: the non-equilibrium stress decays monotonically
        def neq(Dv):
            return np.array([np.abs(cm.cauchy_stress_umat(F[k], Dv[k], J[k], params)[1]).max()
                             for k in range(n)])

        s0 = prev = neq(D)
        monotone = True
        for dt in 2.0 ** np.arange(12):
            D, _ = advance(F, F, D, float(dt), params)
            s = neq(D)
            monotone &= bool(np.all(s <= prev * (1 + 1e-12)))
            prev = s
        decay = float(np.max(s / s0))
        info.update({k: f"{v:.1e}" for k, v in worst.items()})
        info["min dissipation"] = f"{diss.min():.1e}"
        info["NEq stress left after hold"] = f"{decay:.1e}"
        assert monotone
        assert decay < 1e-3
