"""Constitutive kernel of the two-potential viscoelastic model.

Single-point functions.  ``F`` is a ``(3, 3)`` deformation gradient; the
internal variable is always carried as ``Dv``, the inverse of the viscous
right Cauchy-Green tensor, either as Sym3 storage ``(6,)`` or as ``(3, 3)``.
Stresses are in kPa.  Batched versions of the hot paths live in
:mod:`finvisc.kernels`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InvalidDeformationError
from .tensors import as_mat, mat_to_sym, tensor4_to_voigt

THREE = 3.0


@dataclass(frozen=True)
class InvariantSet:
    I1: float
    J: float
    I1bar: float
    I1v: float
    I1e: float
    I2e: float
    I1ebar: float
    I2ebar: float


@dataclass(frozen=True)
class StressTangent:
    """Stress and tangent returned by :func:`tangent_moduli`.

    ``L`` is 6x6 in Sym3 order; contract it with
    :func:`finvisc.tensors.voigt_contract`.
    """

    cauchy: np.ndarray
    piola: np.ndarray
    devTauNEq: np.ndarray
    L: np.ndarray
    Khat: float
    dKhat_dJhat: float


def _clamp3(x):
    # sub-3 values only arise from roundoff
    if x < THREE - 1e-12:
        raise InvalidDeformationError(f"isochoric invariant {x!r} below 3")
    return max(x, THREE)


def _det_positive(F):
    J = float(np.linalg.det(F))
    if not J > 0.0:
        raise InvalidDeformationError(f"det F = {J!r} must be positive")
    return J


def compute_invariants(F, Dv):
    F = np.asarray(F, dtype=float)
    Dv = as_mat(Dv)
    J = _det_positive(F)
    C = F.T @ F
    CD = C @ Dv
    I1 = float(np.trace(C))
    I1e = float(np.trace(CD))
    I2e = 0.5 * (I1e * I1e - float(np.trace(CD @ CD)))
    # tr(Dv^-1) through the cofactor, no inversion
    I2D = 0.5 * (np.trace(Dv) ** 2 - np.trace(Dv @ Dv))
    I1v = float(I2D / np.linalg.det(Dv))
    a = J ** (-2.0 / 3.0)
    return InvariantSet(I1=I1, J=J, I1bar=_clamp3(a * I1), I1v=I1v, I1e=I1e,
                        I2e=I2e, I1ebar=_clamp3(a * I1e), I2ebar=a * a * I2e)


def _two_term(x, c1, c2, e1, e2):
    """Value and two derivatives of the two-term power-law energy."""
    val = d1 = d2 = 0.0
    for c, e in ((c1, e1), (c2, e2)):
        if e == 0:
            raise ContractError("zero exponent is not supported")
        k = THREE ** (1.0 - e) * c
        val += k / (2.0 * e) * (x ** e - THREE ** e)
        d1 += 0.5 * k * x ** (e - 1.0)
        d2 += 0.5 * k * (e - 1.0) * x ** (e - 2.0)
    return val, d1, d2


def psi_eq(I1bar, params):
    """Equilibrium energy and its first two derivatives in I1bar."""
    return _two_term(I1bar, params.mu1, params.mu2, params.alpha1, params.alpha2)


def psi_neq(I1ebar, params):
    """Non-equilibrium energy and its first two derivatives in I1ebar."""
    return _two_term(I1ebar, params.m1, params.m2, params.a1, params.a2)


def j2_neq(inv, params):
    """Second invariant of the deviatoric non-equilibrium Cauchy stress."""
    d1 = psi_neq(inv.I1ebar, params)[1]
    b = inv.I1ebar ** 2 / 3.0 - inv.I2ebar
    return 4.0 * inv.J ** -2 * max(b, 0.0) * d1 * d1


def viscosity(inv, J, params):
    """Shear-thinning viscosity (kPa s)."""
    p = params
    d1 = psi_neq(inv.I1ebar, p)[1]
    j2 = 4.0 * J ** -2 * max(inv.I1ebar ** 2 / 3.0 - inv.I2ebar, 0.0) * d1 * d1
    num = p.eta0 - p.etaInf + p.K1 * (inv.I1v ** p.beta1 - THREE ** p.beta1)
    return p.etaInf + num / (1.0 + (p.K2 * j2) ** p.beta2)


def _deviatoric_piola(F, Dv, inv, params):
    d_eq = psi_eq(inv.I1bar, params)[1]
    d_neq = psi_neq(inv.I1ebar, params)[1]
    a = inv.J ** (-2.0 / 3.0)
    FiT = np.linalg.inv(F).T
    return (2 * a * d_eq * F + 2 * a * d_neq * F @ Dv
            - (2.0 / 3.0) * a * (inv.I1 * d_eq + inv.I1e * d_neq) * FiT), FiT


def piola_stress_compressible(F, Dv, params):
    """First Piola-Kirchhoff stress with the bulk term kappa (J - 1) J F^-T."""
    if params.incompressible:
        raise ContractError("kappa is infinite; use piola_stress_hybrid")
    F = np.asarray(F, dtype=float)
    Dv = as_mat(Dv)
    inv = compute_invariants(F, Dv)
    S, FiT = _deviatoric_piola(F, Dv, inv, params)
    return S + params.kappa * (inv.J - 1.0) * inv.J * FiT


def piola_stress_hybrid(F, Dv, q, params):
    """First Piola-Kirchhoff stress with independent pressure ``q``."""
    F = np.asarray(F, dtype=float)
    Dv = as_mat(Dv)
    inv = compute_invariants(F, Dv)
    S, FiT = _deviatoric_piola(F, Dv, inv, params)
    return S + q * inv.J * FiT


def _volumetric_pressure(Jhat, q, params):
    if q is not None:
        return float(q)
    if params.incompressible:
        raise ContractError("kappa is infinite; pass q instead of Jhat")
    return params.kappa * (Jhat - 1.0)


def _dev_kirchhoff_parts(F, Dv, inv, params):
    """Deviatoric Kirchhoff stress of both branches, as (3, 3)."""
    d_eq = psi_eq(inv.I1bar, params)[1]
    d_neq = psi_neq(inv.I1ebar, params)[1]
    a = inv.J ** (-2.0 / 3.0)
    B = F @ F.T
    Be = F @ Dv @ F.T
    I = np.eye(3)
    tau_eq = 2 * a * d_eq * (B - inv.I1 / 3.0 * I)
    tau_neq = 2 * a * d_neq * (Be - inv.I1e / 3.0 * I)
    return tau_eq, tau_neq


def cauchy_stress_umat(F, Dv, Jhat=1.0, params=None, q=None):
    """Cauchy stress with volumetric part kappa (Jhat - 1).

    Returns ``(T, devT_neq)`` as Sym3 arrays.  For infinite kappa give the
    pressure ``q`` directly; it then replaces kappa (Jhat - 1).
    """
    F = np.asarray(F, dtype=float)
    Dv = as_mat(Dv)
    inv = compute_invariants(F, Dv)
    tau_eq, tau_neq = _dev_kirchhoff_parts(F, Dv, inv, params)
    p = _volumetric_pressure(Jhat, q, params)
    T = (tau_eq + tau_neq) / inv.J + p * np.eye(3)
    return mat_to_sym(T), mat_to_sym(tau_neq / inv.J)


def tangent_moduli(F, Dv, Jhat=1.0, params=None, q=None):
    """Stress, spatial tangent modulus and volumetric moduli at one point.

    ``L_ijkl = (1/2J)(d devtau_ij/dF_kr F_lr + d devtau_ij/dF_lr F_kr)
    + kappa J delta_ij delta_kl`` in closed form.  For infinite kappa the
    bulk term is omitted (the pressure is then an independent field).
    """
    F = np.asarray(F, dtype=float)
    Dv = as_mat(Dv)
    inv = compute_invariants(F, Dv)
    J = inv.J
    a = J ** (-2.0 / 3.0)
    I = np.eye(3)
    _, d_eq, dd_eq = psi_eq(inv.I1bar, params)
    _, d_neq, dd_neq = psi_neq(inv.I1ebar, params)
    Bb = a * F @ F.T
    Bbe = a * F @ Dv @ F.T

    def branch(Bx, x, d, dd):
        devB = Bx - x / 3.0 * I
        L = 4.0 / J * dd * np.einsum("ij,kl->ijkl", devB, devB)
        sym = 0.5 * (np.einsum("ik,jl->ijkl", I, Bx) + np.einsum("jk,il->ijkl", I, Bx)
                     + np.einsum("il,jk->ijkl", I, Bx) + np.einsum("jl,ik->ijkl", I, Bx))
        cross = np.einsum("ij,kl->ijkl", Bx, I) + np.einsum("ij,kl->ijkl", I, Bx)
        II = np.einsum("ij,kl->ijkl", I, I)
        L += 2.0 / J * d * (sym - 2.0 / 3.0 * cross + 2.0 / 9.0 * x * II)
        return L

    L = branch(Bb, inv.I1bar, d_eq, dd_eq) + branch(Bbe, inv.I1ebar, d_neq, dd_neq)
    if params.incompressible:
        Khat = math.inf
    else:
        Khat = params.kappa * J
        L += Khat * np.einsum("ij,kl->ijkl", I, I)

    tau_eq, tau_neq = _dev_kirchhoff_parts(F, Dv, inv, params)
    p = _volumetric_pressure(Jhat, q, params)
    T = (tau_eq + tau_neq) / J + p * I
    S = J * T @ np.linalg.inv(F).T
    return StressTangent(cauchy=mat_to_sym(T), piola=S,
                         devTauNEq=mat_to_sym(tau_neq),
                         L=tensor4_to_voigt(L), Khat=Khat, dKhat_dJhat=0.0)


def flow_rate(F, Dv, params):
    """Rate of change of Dv, returned as Sym3.

    ``dDv/dt = -(2 J^-2/3 Psi'/eta) [Dv C Dv - (C:Dv)/3 Dv]``; no inversion
    of the internal variable is needed.
    """
    F = np.asarray(F, dtype=float)
    Dv = as_mat(Dv)
    inv = compute_invariants(F, Dv)
    eta = viscosity(inv, inv.J, params)
    if eta == 0.0:
        raise ZeroDivisionError("viscosity is zero")
    d_neq = psi_neq(inv.I1ebar, params)[1]
    C = F.T @ F
    g = 2.0 * inv.J ** (-2.0 / 3.0) * d_neq / eta
    rate = -g * (Dv @ C @ Dv - inv.I1e / 3.0 * Dv)
    return mat_to_sym(rate)


def dissipation_rate(F, Dv, params):
    """Viscous dissipation -(d psi / d Cv) : dCv/dt (kPa/s), always >= 0."""
    F = np.asarray(F, dtype=float)
    inv = compute_invariants(F, Dv)
    d_neq = psi_neq(inv.I1ebar, params)[1]
    rate = as_mat(flow_rate(F, Dv, params))
    C = F.T @ F
    return float(-inv.J ** (-2.0 / 3.0) * d_neq * np.sum(C * rate))


def time_scale(F, Dv, params):
    """Material time scale eta / (2 Psi') in seconds; ``inf`` if Psi' = 0."""
    inv = compute_invariants(np.asarray(F, dtype=float), Dv)
    d_neq = psi_neq(inv.I1ebar, params)[1]
    eta = viscosity(inv, inv.J, params)
    if d_neq <= 0.0:
        return math.inf
    return eta / (2.0 * d_neq)


def hyperelastic_piola(F, params, q=None, include_neq=False):
    """Stress of the purely elastic limits (Cv = I or no viscous branch).

    ``include_neq=False`` gives the equilibrium branch alone (relaxed
    limit); ``True`` adds the non-equilibrium branch with Cv = I
    (instantaneous limit).  The volumetric term follows the same rule as the
    viscous model: ``q`` if given, else kappa (J - 1).
    """
    F = np.asarray(F, dtype=float)
    p = params if include_neq else params.with_(m1=0.0, m2=0.0)
    if q is None:
        return piola_stress_compressible(F, np.eye(3), p)
    return piola_stress_hybrid(F, np.eye(3), q, p)
