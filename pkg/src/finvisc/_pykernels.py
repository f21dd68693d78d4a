"""Vectorised numpy implementation of the per-point hot kernels.

Mirrors ``_kernels.pyx`` function for function; selected automatically when
the compiled extension is unavailable.  All arrays are batched along the
first axis: ``F`` is ``(n, 3, 3)``, ``Dv`` is Sym3 ``(n, 6)``, ``p`` is the
packed parameter vector from :meth:`MaterialParams.as_array`.

Status codes: 0 ok, 1 non-positive det F, 2 step rejected (det A <= 0 or
loss of positive definiteness), 3 non-positive or non-finite viscosity.
"""

import numpy as np

OK, BAD_F, BAD_STEP, BAD_ETA = 0, 1, 2, 3

_SLOT = np.array([[0, 3, 4], [3, 1, 5], [4, 5, 2]])
_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

# stage fractions and coefficients of the six-stage fifth-order scheme
C_STAGE = (0.0, 0.5, 0.25, 0.5, 0.75, 1.0)
A_STAGE = (
    (),
    (0.5,),
    (3.0 / 16.0, 1.0 / 16.0),
    (0.0, 0.0, 0.5),
    (0.0, -3.0 / 16.0, 6.0 / 16.0, 9.0 / 16.0),
    (1.0 / 7.0, 4.0 / 7.0, 6.0 / 7.0, -12.0 / 7.0, 8.0 / 7.0),
)
B_STAGE = (7.0 / 90.0, 0.0, 32.0 / 90.0, 12.0 / 90.0, 32.0 / 90.0, 7.0 / 90.0)


def _full(s):
    return s[:, _SLOT]


def _pack(m):
    return np.stack([m[:, i, j] for i, j in _PAIRS], axis=1)


def _det3(m):
    return (m[:, 0, 0] * (m[:, 1, 1] * m[:, 2, 2] - m[:, 1, 2] * m[:, 2, 1])
            - m[:, 0, 1] * (m[:, 1, 0] * m[:, 2, 2] - m[:, 1, 2] * m[:, 2, 0])
            + m[:, 0, 2] * (m[:, 1, 0] * m[:, 2, 1] - m[:, 1, 1] * m[:, 2, 0]))


def _det_sym(s):
    a, b, c, d, e, f = s.T
    return a * b * c + 2.0 * d * e * f - a * f * f - b * e * e - c * d * d


def _dpsi(x, c1, c2, e1, e2):
    k1 = 3.0 ** (1.0 - e1) * c1
    k2 = 3.0 ** (1.0 - e2) * c2
    d1 = 0.5 * (k1 * x ** (e1 - 1.0) + k2 * x ** (e2 - 1.0))
    d2 = 0.5 * (k1 * (e1 - 1.0) * x ** (e1 - 2.0) + k2 * (e2 - 1.0) * x ** (e2 - 2.0))
    return d1, d2


def _eta(p, I1eb, I2eb, I1v, J, dneq):
    j2 = 4.0 / (J * J) * np.maximum(I1eb * I1eb / 3.0 - I2eb, 0.0) * dneq * dneq
    num = p[9] - p[10] + p[11] * (I1v ** p[13] - 3.0 ** p[13])
    return p[10] + num / (1.0 + (p[12] * j2) ** p[14])


def _rate(F, Dv, p):
    """Flow rate of Dv plus a status array."""
    C = np.einsum("nki,nkj->nij", F, F)
    D = _full(Dv)
    J = _det3(F)
    status = np.where(J > 0.0, OK, BAD_F)
    Jp = np.where(J > 0.0, J, 1.0)
    a = Jp ** (-2.0 / 3.0)
    CD = C @ D
    I1e = np.einsum("nii->n", CD)
    I2e = 0.5 * (I1e * I1e - np.einsum("nij,nji->n", CD, CD))
    trD = Dv[:, 0] + Dv[:, 1] + Dv[:, 2]
    I2D = 0.5 * (trD * trD - np.einsum("nij,nji->n", D, D))
    I1v = I2D / _det_sym(Dv)
    I1eb = np.maximum(a * I1e, 3.0)
    dneq, _ = _dpsi(I1eb, p[4], p[5], p[6], p[7])
    eta = _eta(p, I1eb, a * a * I2e, I1v, Jp, dneq)
    bad_eta = ~(np.isfinite(eta) & (eta > 0.0))
    status = np.where((status == OK) & bad_eta, BAD_ETA, status)
    g = 2.0 * a * dneq / np.where(bad_eta, 1.0, eta)
    rate = -g[:, None, None] * (D @ C @ D - (I1e / 3.0)[:, None, None] * D)
    return _pack(rate), status


def flow_rate(F, Dv, p):
    F = np.ascontiguousarray(F, dtype=float).reshape(-1, 3, 3)
    Dv = np.ascontiguousarray(Dv, dtype=float).reshape(-1, 6)
    return _rate(F, Dv, np.asarray(p, dtype=float))


def time_scale(F, Dv, p):
    F = np.ascontiguousarray(F, dtype=float).reshape(-1, 3, 3)
    Dv = np.ascontiguousarray(Dv, dtype=float).reshape(-1, 6)
    p = np.asarray(p, dtype=float)
    C = np.einsum("nki,nkj->nij", F, F)
    D = _full(Dv)
    J = np.abs(_det3(F))
    a = J ** (-2.0 / 3.0)
    CD = C @ D
    I1e = np.einsum("nii->n", CD)
    I2e = 0.5 * (I1e * I1e - np.einsum("nij,nji->n", CD, CD))
    trD = Dv[:, 0] + Dv[:, 1] + Dv[:, 2]
    I1v = 0.5 * (trD * trD - np.einsum("nij,nji->n", D, D)) / _det_sym(Dv)
    I1eb = np.maximum(a * I1e, 3.0)
    dneq, _ = _dpsi(I1eb, p[4], p[5], p[6], p[7])
    eta = _eta(p, I1eb, a * a * I2e, I1v, J, dneq)
    with np.errstate(divide="ignore"):
        return np.where(dneq > 0.0, eta / (2.0 * np.where(dneq > 0, dneq, 1.0)), np.inf)


def _rk5_once(F0, F1, D0, h, p):
    dF = F1 - F0
    G = []
    status = np.zeros(len(D0), dtype=np.int64)
    for s in range(6):
        Ds = D0.copy()
        for j, aj in enumerate(A_STAGE[s]):
            if aj != 0.0:
                Ds += (h * aj) * G[j]
        g, st = _rate(F0 + C_STAGE[s] * dF, Ds, p)
        status = np.maximum(status, st)
        G.append(g)
    A = D0 + h * sum(b * g for b, g in zip(B_STAGE, G) if b != 0.0)
    detA = _det_sym(A)
    spd = (A[:, 0] > 0.0) & (A[:, 0] * A[:, 1] - A[:, 3] ** 2 > 0.0) & (detA > 0.0)
    status = np.where((status == OK) & ~spd, BAD_STEP, status)
    detA = np.where(spd, detA, 1.0)
    A = A / np.cbrt(detA)[:, None]
    # second pass removes the roundoff of the first
    return A / np.cbrt(np.where(spd, _det_sym(A), 1.0))[:, None], status


def rk5_march(F0, F1, Dv0, dt, p, nsub=1):
    """Advance Dv over ``dt`` in ``nsub`` equal sub-steps.

    ``F`` is interpolated linearly between ``F0`` and ``F1`` across
    sub-steps and stages.  Returns ``(Dv1, status)``; rejected points keep
    their last accepted value and carry a nonzero status.
    """
    F0 = np.ascontiguousarray(F0, dtype=float).reshape(-1, 3, 3)
    F1 = np.ascontiguousarray(F1, dtype=float).reshape(-1, 3, 3)
    D = np.array(Dv0, dtype=float).reshape(-1, 6)
    p = np.asarray(p, dtype=float)
    h = dt / nsub
    status = np.zeros(len(D), dtype=np.int64)
    dF = F1 - F0
    for k in range(nsub):
        Fa = F0 + (k / nsub) * dF
        Fb = F0 + ((k + 1) / nsub) * dF if k + 1 < nsub else F1
        with np.errstate(all="ignore"):  # rejected points are flagged, not raised
            Dn, st = _rk5_once(Fa, Fb, D, h, p)
        good = (status == OK) & (st == OK)
        D = np.where(good[:, None], Dn, D)
        status = np.where(status == OK, st, status)
    return D, status


def stress_tangent(F, Dv, q, p, tangent=True):
    """Hybrid first Piola stress and its derivative dS/dF at fixed q and Dv.

    Returns ``(S, A, status)`` with ``S`` ``(n, 3, 3)`` and ``A``
    ``(n, 3, 3, 3, 3)`` indexed ``[n, i, J, k, L]`` (``None`` when
    ``tangent`` is false).
    """
    F = np.ascontiguousarray(F, dtype=float).reshape(-1, 3, 3)
    Dv = np.ascontiguousarray(Dv, dtype=float).reshape(-1, 6)
    q = np.asarray(q, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float)
    D = _full(Dv)
    J = _det3(F)
    status = np.where(J > 0.0, OK, BAD_F)
    Jp = np.where(J > 0.0, J, 1.0)
    Fs = np.where((J > 0.0)[:, None, None], F, np.eye(3))
    FiT = np.swapaxes(np.linalg.inv(Fs), 1, 2)
    a = Jp ** (-2.0 / 3.0)
    FD = Fs @ D
    I1 = np.einsum("nij,nij->n", Fs, Fs)
    I1e = np.einsum("nij,nij->n", Fs, FD)
    x1 = np.maximum(a * I1, 3.0)
    x2 = np.maximum(a * I1e, 3.0)
    d1, dd1 = _dpsi(x1, p[0], p[1], p[2], p[3])
    d2, dd2 = _dpsi(x2, p[4], p[5], p[6], p[7])
    N1 = 2.0 * a[:, None, None] * (Fs - (I1 / 3.0)[:, None, None] * FiT)
    N2 = 2.0 * a[:, None, None] * (FD - (I1e / 3.0)[:, None, None] * FiT)
    qJ = q * Jp
    S = d1[:, None, None] * N1 + d2[:, None, None] * N2 + qJ[:, None, None] * FiT
    if not tangent:
        return S, None, status

    def dN(M, FM, I):
        c = a[:, None, None, None, None]
        t = 2.0 * np.einsum("ik,nLJ->niJkL", np.eye(3), M)
        t -= (4.0 / 3.0) * (np.einsum("nkL,niJ->niJkL", FiT, FM)
                            + np.einsum("nkL,niJ->niJkL", FM, FiT))
        t += (4.0 / 9.0) * I[:, None, None, None, None] * np.einsum("niJ,nkL->niJkL", FiT, FiT)
        t += (2.0 / 3.0) * I[:, None, None, None, None] * np.einsum("nkJ,niL->niJkL", FiT, FiT)
        return c * t

    eye = np.broadcast_to(np.eye(3), D.shape)
    A = (dd1[:, None, None, None, None] * np.einsum("niJ,nkL->niJkL", N1, N1)
         + dd2[:, None, None, None, None] * np.einsum("niJ,nkL->niJkL", N2, N2)
         + d1[:, None, None, None, None] * dN(eye, Fs, I1)
         + d2[:, None, None, None, None] * dN(D, FD, I1e)
         + qJ[:, None, None, None, None] * (np.einsum("niJ,nkL->niJkL", FiT, FiT)
                                           - np.einsum("nkJ,niL->niJkL", FiT, FiT)))
    return S, A, status


def _scalar_rate(lam, lv, p):
    l6 = lam ** 6
    v6 = lv ** 6
    I1eb = np.maximum((2.0 * l6 + v6) / (lam ** 4 * lv * lv), 3.0)
    I2eb = (l6 + 2.0 * v6) / (lam * lam * lv ** 4)
    I1v = (1.0 + 2.0 * v6) / lv ** 4
    dneq, _ = _dpsi(I1eb, p[4], p[5], p[6], p[7])
    eta = _eta(p, I1eb, I2eb, I1v, 1.0, dneq)
    return dneq * lv * (l6 / v6 - 1.0) / (3.0 * eta * lam ** 4 / lv ** 4), eta


def rk5_scalar(lam_stages, lv0, dt, p):
    """Advance the viscous stretch of the incompressible shell one step.

    ``lam_stages`` is ``(n, 5)``: the stretch at fractions 0, 1/4, 1/2,
    3/4, 1 of the step.  Returns ``(lv1, status)``.
    """
    lam = np.asarray(lam_stages, dtype=float).reshape(-1, 5)
    lv0 = np.asarray(lv0, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float)
    col = {0.0: 0, 0.25: 1, 0.5: 2, 0.75: 3, 1.0: 4}
    G = []
    status = np.zeros(len(lv0), dtype=np.int64)
    for s in range(6):
        v = lv0.copy()
        for j, aj in enumerate(A_STAGE[s]):
            if aj != 0.0:
                v = v + (dt * aj) * G[j]
        status = np.where((status == OK) & ~(v > 0.0), BAD_STEP, status)
        v = np.where(v > 0.0, v, 1.0)
        g, eta = _scalar_rate(lam[:, col[C_STAGE[s]]], v, p)
        status = np.where((status == OK) & ~(eta > 0.0), BAD_ETA, status)
        G.append(g)
    lv1 = lv0 + dt * sum(b * g for b, g in zip(B_STAGE, G) if b != 0.0)
    status = np.where((status == OK) & ~(lv1 > 0.0), BAD_STEP, status)
    return np.where(status == OK, lv1, lv0), status
