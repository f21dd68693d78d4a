"""Ready-made boundary-value problems: the cube patch test and the shell."""

import time
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..shell import ShellGeometry, pressure_history
from .assembly import BVPConfig, DirichletBC
from .mesh import generate_shell_mesh
from .solver import outer_pressure_fe, run


def patch_test_config(mesh, params, program, dt, **kw):
    """Uniaxial stress on the unit cube with symmetry rollers.

    ``X3 = 0`` is held in the 3-direction, ``X3 = 1`` moves with
    ``F33(t) - 1``, and the planes ``X1 = 0``, ``X2 = 0`` carry rollers,
    which remove rigid motions while leaving the homogeneous solution
    intact.  The faces ``X1 = 1`` and ``X2 = 1`` are traction free.
    """
    if program.mode != "uniaxial":
        raise ContractError("patch test needs a uniaxial-mode load program")
    bcs = [
        DirichletBC(mesh.nodes_on("z0"), 2),
        DirichletBC(mesh.nodes_on("z1"), 2,
                    lambda t, X: (program.F33(t) - 1.0) * X[:, 2]),
        DirichletBC(mesh.nodes_on("x0"), 0),
        DirichletBC(mesh.nodes_on("y0"), 1),
    ]
    return BVPConfig(mesh, params, bcs, program.time_grid(dt), **kw)


def homogeneity(asm, state):
    """Largest deviation of F at the volume points from its mean."""
    F = state.F
    return float(np.max(np.abs(F - F.mean(axis=0))))


def shell_config(mesh, params, geometry, times, **kw):
    """Radial motion ``y = (b(t)/B) X`` on the outer surface, rollers on
    the symmetry planes and a traction-free inner surface."""
    outer = mesh.nodes_on("outer")
    scale = lambda t: geometry.b(t) / geometry.B - 1.0
    bcs = [DirichletBC(outer, k, lambda t, X, k=k: scale(t) * X[:, k]) for k in range(3)]
    bcs += [DirichletBC(mesh.nodes_on(f"sym_{ax}"), k) for k, ax in enumerate("xyz")]
    kw.setdefault("tracked_facets", ("outer",))
    return BVPConfig(mesh, params, bcs, times, **kw)


def solve_shell(mesh, params, geometry, times, **kw):
    """Outer pressure history of the FE shell; returns ``(P_h, asm, states)``."""
    cfg = shell_config(mesh, params, geometry, times, **kw)
    P = []
    asm, states = run(cfg, callback=lambda a, s: P.append(outer_pressure_fe(a, s)))
    return np.array(P), asm, states


@dataclass
class ConvergenceRow:
    level: int
    h: float
    n_dof: int
    eps_P: float
    P_h: float
    wall_s: float


def convergence_study(levels, params, rate=0.05, t_end=10.0, n_steps=10, A=0.9, B=1.0,
                      n_gauss=100, reference=None, **kw):
    """Error of the outer pressure at ``t_end`` over a family of octant meshes.

    ``levels`` is a sequence of ``(nr, ntheta)`` pairs.  The reference is
    the Gauss-quadrature shell solution unless given.
    """
    geometry = ShellGeometry.ramp(A, B, rate, t_end)
    times = np.linspace(0.0, t_end, n_steps + 1)
    if reference is None:
        ref_times = np.linspace(0.0, t_end, 100 * n_steps + 1)
        reference = pressure_history(ref_times, geometry, params, n_gauss)[-1]
    rows = []
    for k, (nr, nt) in enumerate(levels):
        t0 = time.perf_counter()
        mesh = generate_shell_mesh(nr, nt, A, B)
        try:
            P, asm, _ = solve_shell(mesh, params, geometry, times, **kw)
        except Exception as exc:
            raise type(exc)(f"mesh level {k} ({nr}, {nt}): {exc}") from exc
        rows.append(ConvergenceRow(k, mesh.mean_circumdiameter(), asm.dofs.n,
                                   abs(reference - P[-1]) / abs(reference), float(P[-1]),
                                   time.perf_counter() - t0))
    return rows, float(reference)
