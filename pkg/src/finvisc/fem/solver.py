"""Staggered time stepping of the mixed finite-element problem.

Every step alternates one global Newton iteration on (displacement,
pressure) with the internal variable frozen, and a Runge-Kutta update of
the internal variable at all quadrature points using the deformation
gradient interpolated between the last converged state and the current
iterate.  The loop stops when both the equilibrium residual and the
change in the internal variable are small.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from ..errors import (InvalidDeformationError, NonConvergenceError, SingularSystemError,
                      StepTooLargeError)
from ..evolution import MAX_HALVINGS, advance
from ..tensors import IDENTITY6
from .assembly import Assembler, QPState

MAX_STAGGER = 100
_RES_FLOOR = 1e-13


@dataclass
class FEState:
    t: float
    z: np.ndarray
    qp: QPState
    F: np.ndarray  # (ne * nq, 3, 3) at the volume points
    facet_F: dict = field(default_factory=dict)
    iterations: int = 0
    history: list = field(default_factory=list)


def initial_state(asm):
    n_qp = asm.mesh.n_elements * asm.nq
    facet_Dv = {k: np.tile(IDENTITY6, (g["N"].shape[0] * g["N"].shape[1], 1))
                for k, g in asm.facets.items()}
    facet_F = {k: np.tile(np.eye(3), (g["N"].shape[0] * g["N"].shape[1], 1, 1))
               for k, g in asm.facets.items()}
    return FEState(0.0, np.zeros(asm.dofs.n), QPState(np.tile(IDENTITY6, (n_qp, 1)), facet_Dv),
                   np.tile(np.eye(3), (n_qp, 1, 1)), facet_F)


def apply_dirichlet(asm, z, t):
    X = asm.mesh.X
    for bc in asm.cfg.dirichlet:
        z[3 * np.asarray(bc.nodes) + bc.component] = bc.values(t, X)
    return z


def _advance_groups(asm, F0, F1, Dv, dt, groups):
    out = np.empty_like(Dv)
    for g, params in enumerate(asm.cfg.params):
        sel = np.flatnonzero(groups == g)
        if sel.size:
            out[sel], _ = advance(F0[sel], F1[sel], Dv[sel], dt, params, asm.cfg.safety)
    return out


def _facet_F(asm, z, name):
    g = asm.facets[name]
    u, _ = asm.split(z)
    ue = u[asm.mesh.tets[g["elements"]]]
    return (np.eye(3) + np.einsum("eai,eqaJ->eqiJ", ue, g["dNdX"])).reshape(-1, 3, 3)


def solve_step(asm, state, t_new):
    """One staggered step from a converged ``state`` to ``t_new``."""
    cfg = asm.cfg
    dt = t_new - state.t
    if not dt > 0:
        raise ValueError("time must increase")
    z_old = state.z
    z = apply_dirichlet(asm, z_old.copy(), t_new)
    Dv = state.qp.Dv
    free = asm.dofs.free
    history = []
    r0 = None
    dD = np.inf
    for it in range(MAX_STAGGER + 1):
        if it == 0:
            # linearized predictor: the prescribed increment enters through
            # the tangent at the converged state
            R, K, Kdz = asm.assemble(z_old, Dv, t_new, tangent=True, dz=z - z_old)
            R = R + Kdz
        else:
            R, K = asm.assemble(z, Dv, t_new, tangent=True)
        res = asm.scaled_norm(R)
        history.append(res)
        if r0 is None:
            r0 = res
        if it > 0 and res <= max(cfg.tol1 * r0, _RES_FLOOR) and dD <= cfg.tol2:
            F = asm.deformation(z).reshape(-1, 3, 3)
            facet_Dv, facet_F = {}, {}
            for name in asm.facets:
                Ff = _facet_F(asm, z, name)
                grp = np.repeat(cfg.element_material[asm.facets[name]["elements"]],
                                asm.facets[name]["N"].shape[1])
                facet_Dv[name] = _advance_groups(asm, state.facet_F[name], Ff,
                                                 state.qp.facet_Dv[name], dt, grp)
                facet_F[name] = Ff
            return FEState(t_new, z, QPState(Dv, facet_Dv), F, facet_F, it, history)
        if it == MAX_STAGGER:
            break
        try:
            lu = splu(K.tocsc())
            dz = lu.solve(-R[free])
        except RuntimeError as exc:
            raise SingularSystemError(f"linear solve failed at t = {t_new}: {exc}") from exc
        if not np.all(np.isfinite(dz)):
            raise SingularSystemError(f"non-finite Newton update at t = {t_new}")
        z[free] += dz
        F = asm.deformation(z).reshape(-1, 3, 3)
        if np.any(np.linalg.det(F) <= 0):
            bad = int(np.flatnonzero(np.linalg.det(F) <= 0)[0]) // asm.nq
            raise InvalidDeformationError(f"det F <= 0 in element {bad} at t = {t_new}")
        D_new = _advance_groups(asm, state.F, F, state.qp.Dv, dt, asm.group)
        dD = float(np.max(np.abs(D_new - Dv)) / np.max(np.abs(D_new)))
        Dv = D_new
    raise NonConvergenceError(f"staggered loop did not converge in {MAX_STAGGER} "
                              f"iterations at t = {t_new}", history)


_RECOVERABLE = (NonConvergenceError, InvalidDeformationError, StepTooLargeError,
                SingularSystemError)


def advance_to(asm, state, t_target, max_halvings=MAX_HALVINGS):
    """Reach ``t_target`` from ``state``, halving the step on failure."""
    pieces = 1
    for _ in range(max_halvings + 1):
        try:
            s = state
            for k in range(1, pieces + 1):
                s = solve_step(asm, s, state.t + (t_target - state.t) * k / pieces)
            return s, pieces
        except _RECOVERABLE as exc:
            last = exc
            pieces *= 2
    raise last


def run(cfg, callback=None):
    """Solve over ``cfg.times``; returns the assembler and the list of states.

    ``callback(asm, state)`` is called after every converged output time.
    """
    asm = Assembler(cfg)
    state = initial_state(asm)
    states = [state]
    if callback is not None:
        callback(asm, state)
    for t in cfg.times[1:]:
        state, _ = advance_to(asm, state, float(t))
        states.append(state)
        if callback is not None:
            callback(asm, state)
    return asm, states


def facet_stress(asm, state, name):
    """First Piola stress ``(nf, nqf, 3, 3)`` at the points of a tracked facet set."""
    g = asm.facets[name]
    F = state.facet_F[name]
    q = asm.pressure(state.z, g["elements"], g["Nq"]).reshape(-1)
    grp = np.repeat(asm.cfg.element_material[g["elements"]], g["N"].shape[1])
    S, _, _ = asm.stress(F, state.qp.facet_Dv[name], q, grp, tangent=False)
    return S.reshape(g["N"].shape[0], g["N"].shape[1], 3, 3)


def outer_pressure_fe(asm, state, name="outer"):
    """Area-averaged radial nominal traction on a tracked facet set.

    ``P_h = int (S N) . X/|X| dA / int dA`` over the reference facets.
    """
    g = asm.facets[name]
    S = facet_stress(asm, state, name)
    traction = np.einsum("fqiJ,fqJ->fqi", S, g["NdA"])
    er = g["X"] / np.linalg.norm(g["X"], axis=2, keepdims=True)
    return float(np.sum(traction * er) / np.sum(np.linalg.norm(g["NdA"], axis=2)))


def reactions(asm, state):
    """Residual at the constrained dofs (reaction forces) of a converged state."""
    R, _ = asm.assemble(state.z, state.qp.Dv, state.t, tangent=False)
    return R
