# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-point kernels; same API and status codes as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, cbrt, isfinite, fmax, INFINITY

cnp.import_array()

cdef enum:
    OK = 0
    BAD_F = 1
    BAD_STEP = 2
    BAD_ETA = 3

cdef double[6] C_ST = [0.0, 0.5, 0.25, 0.5, 0.75, 1.0]
cdef double[6][5] A_ST = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 16.0, 1.0 / 16.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.5, 0.0, 0.0],
    [0.0, -3.0 / 16.0, 6.0 / 16.0, 9.0 / 16.0, 0.0],
    [1.0 / 7.0, 4.0 / 7.0, 6.0 / 7.0, -12.0 / 7.0, 8.0 / 7.0],
]
cdef double[6] B_ST = [7.0 / 90.0, 0.0, 32.0 / 90.0, 12.0 / 90.0, 32.0 / 90.0, 7.0 / 90.0]
# slot of (i, j) in Sym3 storage
cdef int[3][3] SLOT = [[0, 3, 4], [3, 1, 5], [4, 5, 2]]


cdef inline double det3(const double* m) noexcept nogil:
    return (m[0] * (m[4] * m[8] - m[5] * m[7])
            - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6]))


cdef inline double det_sym(const double* s) noexcept nogil:
    return (s[0] * s[1] * s[2] + 2.0 * s[3] * s[4] * s[5]
            - s[0] * s[5] * s[5] - s[1] * s[4] * s[4] - s[2] * s[3] * s[3])


cdef inline void dpsi(double x, double c1, double c2, double e1, double e2,
                      double* d1, double* d2) noexcept nogil:
    cdef double k1 = pow(3.0, 1.0 - e1) * c1
    cdef double k2 = pow(3.0, 1.0 - e2) * c2
    d1[0] = 0.5 * (k1 * pow(x, e1 - 1.0) + k2 * pow(x, e2 - 1.0))
    d2[0] = 0.5 * (k1 * (e1 - 1.0) * pow(x, e1 - 2.0) + k2 * (e2 - 1.0) * pow(x, e2 - 2.0))


cdef inline double eta_fn(const double* p, double I1eb, double I2eb, double I1v,
                          double J, double dneq) noexcept nogil:
    cdef double j2 = 4.0 / (J * J) * fmax(I1eb * I1eb / 3.0 - I2eb, 0.0) * dneq * dneq
    cdef double num = p[9] - p[10] + p[11] * (pow(I1v, p[13]) - pow(3.0, p[13]))
    return p[10] + num / (1.0 + pow(p[12] * j2, p[14]))


cdef int rate_point(const double* F, const double* D6, const double* p,
                    double* out, double* tau) noexcept nogil:
    """Flow rate of Dv at one point; also writes the time scale."""
    cdef double C[9]
    cdef double D[9]
    cdef double CD[9]
    cdef double DCD[9]
    cdef int i, j, k
    cdef double J = det3(F)
    if not J > 0.0:
        return BAD_F
    for i in range(3):
        for j in range(3):
            C[3 * i + j] = F[i] * F[j] + F[3 + i] * F[3 + j] + F[6 + i] * F[6 + j]
            D[3 * i + j] = D6[SLOT[i][j]]
    for i in range(3):
        for j in range(3):
            CD[3 * i + j] = C[3 * i] * D[j] + C[3 * i + 1] * D[3 + j] + C[3 * i + 2] * D[6 + j]
    cdef double I1e = CD[0] + CD[4] + CD[8]
    cdef double trCD2 = 0.0
    cdef double trD2 = 0.0
    for i in range(3):
        for j in range(3):
            trCD2 += CD[3 * i + j] * CD[3 * j + i]
            trD2 += D[3 * i + j] * D[3 * j + i]
    cdef double I2e = 0.5 * (I1e * I1e - trCD2)
    cdef double trD = D[0] + D[4] + D[8]
    cdef double I1v = 0.5 * (trD * trD - trD2) / det_sym(D6)
    cdef double a = pow(J, -2.0 / 3.0)
    cdef double I1eb = fmax(a * I1e, 3.0)
    cdef double dneq, ddneq
    dpsi(I1eb, p[4], p[5], p[6], p[7], &dneq, &ddneq)
    cdef double eta = eta_fn(p, I1eb, a * a * I2e, I1v, J, dneq)
    if not (eta > 0.0 and isfinite(eta)):
        return BAD_ETA
    tau[0] = eta / (2.0 * dneq)
    cdef double g = 2.0 * a * dneq / eta
    # D C D = D (C D)
    for i in range(3):
        for j in range(3):
            DCD[3 * i + j] = D[3 * i] * CD[j] + D[3 * i + 1] * CD[3 + j] + D[3 * i + 2] * CD[6 + j]
    for k in range(6):
        if k == 0:
            i = 0; j = 0
        elif k == 1:
            i = 1; j = 1
        elif k == 2:
            i = 2; j = 2
        elif k == 3:
            i = 0; j = 1
        elif k == 4:
            i = 0; j = 2
        else:
            i = 1; j = 2
        out[k] = -g * (0.5 * (DCD[3 * i + j] + DCD[3 * j + i]) - I1e / 3.0 * D[3 * i + j])
    return OK


cdef int rk5_point(const double* Fa, const double* Fb, const double* D0, double h,
                   const double* p, double* D1) noexcept nogil:
    cdef double G[6][6]
    cdef double Ds[6]
    cdef double Fs[9]
    cdef double A[6]
    cdef double tau
    cdef int s, j, k, st
    for s in range(6):
        for k in range(6):
            Ds[k] = D0[k]
            for j in range(s):
                Ds[k] += h * A_ST[s][j] * G[j][k]
        for k in range(9):
            Fs[k] = Fa[k] + C_ST[s] * (Fb[k] - Fa[k])
        st = rate_point(Fs, Ds, p, G[s], &tau)
        if st != OK:
            return st
    for k in range(6):
        A[k] = D0[k]
        for s in range(6):
            A[k] += h * B_ST[s] * G[s][k]
    cdef double detA = det_sym(A)
    if not (A[0] > 0.0 and A[0] * A[1] - A[3] * A[3] > 0.0 and detA > 0.0):
        return BAD_STEP
    cdef double f = 1.0 / cbrt(detA)
    for k in range(6):
        D1[k] = A[k] * f
    # second pass removes the roundoff of the first
    f = 1.0 / cbrt(det_sym(D1))
    for k in range(6):
        D1[k] *= f
    return OK


def flow_rate(F, Dv, p):
    cdef const double[:, ::1] Fv = np.ascontiguousarray(F, dtype=float).reshape(-1, 9)
    cdef const double[:, ::1] Dm = np.ascontiguousarray(Dv, dtype=float).reshape(-1, 6)
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=float)
    cdef Py_ssize_t n = Fv.shape[0], i
    out = np.zeros((n, 6))
    status = np.zeros(n, dtype=np.int64)
    cdef double[:, ::1] ov = out
    cdef long long[::1] sv = status
    cdef double tau
    with nogil:
        for i in range(n):
            sv[i] = rate_point(&Fv[i, 0], &Dm[i, 0], &pv[0], &ov[i, 0], &tau)
    return out, status


def time_scale(F, Dv, p):
    cdef const double[:, ::1] Fv = np.ascontiguousarray(F, dtype=float).reshape(-1, 9)
    cdef const double[:, ::1] Dm = np.ascontiguousarray(Dv, dtype=float).reshape(-1, 6)
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=float)
    cdef Py_ssize_t n = Fv.shape[0], i
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double rate[6]
    cdef double tau
    with nogil:
        for i in range(n):
            if rate_point(&Fv[i, 0], &Dm[i, 0], &pv[0], rate, &tau) == OK:
                ov[i] = tau
            else:
                ov[i] = INFINITY
    return out


def rk5_march(F0, F1, Dv0, double dt, p, int nsub=1):
    cdef const double[:, ::1] Fa = np.ascontiguousarray(F0, dtype=float).reshape(-1, 9)
    cdef const double[:, ::1] Fb = np.ascontiguousarray(F1, dtype=float).reshape(-1, 9)
    D = np.array(Dv0, dtype=float).reshape(-1, 6)
    cdef double[:, ::1] Dm = D
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=float)
    cdef Py_ssize_t n = Fa.shape[0], i
    status = np.zeros(n, dtype=np.int64)
    cdef long long[::1] sv = status
    cdef double Fs[9]
    cdef double Fe[9]
    cdef double Dn[6]
    cdef double h = dt / nsub
    cdef int k, m, st
    with nogil:
        for i in range(n):
            for k in range(nsub):
                for m in range(9):
                    Fs[m] = Fa[i, m] + (<double> k / nsub) * (Fb[i, m] - Fa[i, m])
                    if k + 1 < nsub:
                        Fe[m] = Fa[i, m] + (<double> (k + 1) / nsub) * (Fb[i, m] - Fa[i, m])
                    else:
                        Fe[m] = Fb[i, m]
                st = rk5_point(Fs, Fe, &Dm[i, 0], h, &pv[0], Dn)
                if st != OK:
                    sv[i] = st
                    break
                for m in range(6):
                    Dm[i, m] = Dn[m]
    return D, status


cdef int stress_point(const double* F, const double* D6, double q, const double* p,
                      double* S, double* A, bint tangent) noexcept nogil:
    cdef double D[9]
    cdef double FiT[9]
    cdef double FD[9]
    cdef double N1[9]
    cdef double N2[9]
    cdef int i, J_, k, L, r
    cdef double J = det3(F)
    if not J > 0.0:
        return BAD_F
    for i in range(3):
        for k in range(3):
            D[3 * i + k] = D6[SLOT[i][k]]
    # F^-T = cof(F) / J
    FiT[0] = (F[4] * F[8] - F[5] * F[7]) / J
    FiT[1] = (F[5] * F[6] - F[3] * F[8]) / J
    FiT[2] = (F[3] * F[7] - F[4] * F[6]) / J
    FiT[3] = (F[2] * F[7] - F[1] * F[8]) / J
    FiT[4] = (F[0] * F[8] - F[2] * F[6]) / J
    FiT[5] = (F[1] * F[6] - F[0] * F[7]) / J
    FiT[6] = (F[1] * F[5] - F[2] * F[4]) / J
    FiT[7] = (F[2] * F[3] - F[0] * F[5]) / J
    FiT[8] = (F[0] * F[4] - F[1] * F[3]) / J
    cdef double I1 = 0.0
    cdef double I1e = 0.0
    for i in range(3):
        for k in range(3):
            FD[3 * i + k] = F[3 * i] * D[k] + F[3 * i + 1] * D[3 + k] + F[3 * i + 2] * D[6 + k]
    for r in range(9):
        I1 += F[r] * F[r]
        I1e += F[r] * FD[r]
    cdef double a = pow(J, -2.0 / 3.0)
    cdef double d1, dd1, d2, dd2
    dpsi(fmax(a * I1, 3.0), p[0], p[1], p[2], p[3], &d1, &dd1)
    dpsi(fmax(a * I1e, 3.0), p[4], p[5], p[6], p[7], &d2, &dd2)
    cdef double qJ = q * J
    for r in range(9):
        N1[r] = 2.0 * a * (F[r] - I1 / 3.0 * FiT[r])
        N2[r] = 2.0 * a * (FD[r] - I1e / 3.0 * FiT[r])
        S[r] = d1 * N1[r] + d2 * N2[r] + qJ * FiT[r]
    if not tangent:
        return OK
    cdef double v, delta
    cdef int iJ, kL
    for i in range(3):
        for J_ in range(3):
            iJ = 3 * i + J_
            for k in range(3):
                for L in range(3):
                    kL = 3 * k + L
                    v = dd1 * N1[iJ] * N1[kL] + dd2 * N2[iJ] * N2[kL]
                    delta = 1.0 if i == k else 0.0
                    # d N1 / dF (M = I)
                    v += d1 * a * (2.0 * delta * (1.0 if L == J_ else 0.0)
                                   - 4.0 / 3.0 * (FiT[kL] * F[iJ] + F[kL] * FiT[iJ])
                                   + 4.0 / 9.0 * I1 * FiT[iJ] * FiT[kL]
                                   + 2.0 / 3.0 * I1 * FiT[3 * k + J_] * FiT[3 * i + L])
                    # d N2 / dF (M = Dv)
                    v += d2 * a * (2.0 * delta * D[3 * L + J_]
                                   - 4.0 / 3.0 * (FiT[kL] * FD[iJ] + FD[kL] * FiT[iJ])
                                   + 4.0 / 9.0 * I1e * FiT[iJ] * FiT[kL]
                                   + 2.0 / 3.0 * I1e * FiT[3 * k + J_] * FiT[3 * i + L])
                    v += qJ * (FiT[iJ] * FiT[kL] - FiT[3 * k + J_] * FiT[3 * i + L])
                    A[9 * iJ + kL] = v
    return OK


def stress_tangent(F, Dv, q, p, bint tangent=True):
    cdef const double[:, ::1] Fv = np.ascontiguousarray(F, dtype=float).reshape(-1, 9)
    cdef const double[:, ::1] Dm = np.ascontiguousarray(Dv, dtype=float).reshape(-1, 6)
    cdef const double[::1] qv = np.ascontiguousarray(np.broadcast_to(np.asarray(q, dtype=float).reshape(-1), (Fv.shape[0],)))
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=float)
    cdef Py_ssize_t n = Fv.shape[0], i
    S = np.zeros((n, 3, 3))
    A = np.zeros((n, 3, 3, 3, 3)) if tangent else np.zeros((1, 81))
    status = np.zeros(n, dtype=np.int64)
    cdef double[:, ::1] Sv = S.reshape(n, 9)
    cdef double[:, ::1] Av = A.reshape(-1, 81)
    cdef long long[::1] sv = status
    with nogil:
        for i in range(n):
            sv[i] = stress_point(&Fv[i, 0], &Dm[i, 0], qv[i], &pv[0], &Sv[i, 0],
                                 &Av[i if tangent else 0, 0], tangent)
    return S, (A if tangent else None), status


cdef inline int scalar_rate(double lam, double lv, const double* p,
                            double* out) noexcept nogil:
    cdef double l6 = pow(lam, 6.0)
    cdef double v6 = pow(lv, 6.0)
    cdef double I1eb = fmax((2.0 * l6 + v6) / (pow(lam, 4.0) * lv * lv), 3.0)
    cdef double I2eb = (l6 + 2.0 * v6) / (lam * lam * pow(lv, 4.0))
    cdef double I1v = (1.0 + 2.0 * v6) / pow(lv, 4.0)
    cdef double dneq, ddneq
    dpsi(I1eb, p[4], p[5], p[6], p[7], &dneq, &ddneq)
    cdef double eta = eta_fn(p, I1eb, I2eb, I1v, 1.0, dneq)
    if not (eta > 0.0 and isfinite(eta)):
        return BAD_ETA
    out[0] = dneq * lv * (l6 / v6 - 1.0) / (3.0 * eta * pow(lam, 4.0) / pow(lv, 4.0))
    return OK


def rk5_scalar(lam_stages, lv0, double dt, p):
    cdef const double[:, ::1] lam = np.ascontiguousarray(lam_stages, dtype=float).reshape(-1, 5)
    cdef const double[::1] l0 = np.ascontiguousarray(lv0, dtype=float).reshape(-1)
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=float)
    cdef Py_ssize_t n = lam.shape[0], i
    out = np.array(l0, dtype=float)
    status = np.zeros(n, dtype=np.int64)
    cdef double[::1] ov = out
    cdef long long[::1] sv = status
    cdef double G[6]
    cdef double v, acc
    cdef int s, j, st, col
    with nogil:
        for i in range(n):
            st = OK
            for s in range(6):
                v = l0[i]
                for j in range(s):
                    v += dt * A_ST[s][j] * G[j]
                if not v > 0.0:
                    st = BAD_STEP
                    break
                col = <int> (C_ST[s] * 4.0 + 0.5)
                st = scalar_rate(lam[i, col], v, &pv[0], &G[s])
                if st != OK:
                    break
            if st == OK:
                acc = l0[i]
                for s in range(6):
                    acc += dt * B_ST[s] * G[s]
                if acc > 0.0:
                    ov[i] = acc
                else:
                    st = BAD_STEP
            sv[i] = st
    return out, status
