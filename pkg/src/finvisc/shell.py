"""Radially symmetric deformation of an incompressible spherical shell.

The outer radius follows a prescribed history ``b(t)`` and the inner
surface is traction free.  The deformation is known in closed form,
``y = lambda(R, t) X``; the only unknown is the viscous stretch
``lv(R, t)``, which obeys an uncoupled scalar ODE at every radius.  The
outer nominal pressure is a radial integral evaluated by Gauss-Legendre
quadrature.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GeometryError
from .evolution import MAX_HALVINGS, _raise_for

_LEG_TOL = 1e-15


def _legendre(x, n):
    """``P_n(x)`` and ``P_n'(x)`` by the three-term recurrence."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    if n == 1:
        p0 = np.ones_like(x)
    return p1, n * (x * p1 - p0) / (x * x - 1.0)


def gauss_legendre(n, a=-1.0, b=1.0):
    """Gauss-Legendre nodes and weights on ``[a, b]`` by Newton iteration.

    Roots of ``P_n`` are refined from the cosine initial guess; weights are
    ``2 / ((1 - x^2) P_n'(x)^2)``.  Nodes are returned in ascending order.
    """
    if n < 1:
        raise ValueError("need at least one point")
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        pn, dp = _legendre(x, n)
        dx = pn / dp
        x = x - dx
        if np.max(np.abs(dx)) < _LEG_TOL:
            break
    _, dp = _legendre(x, n)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    x, w = x[::-1], w[::-1]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@dataclass(frozen=True)
class ShellGeometry:
    """Inner and outer reference radii and a piecewise-linear ``b(t)``.

    ``segments`` holds ``(duration, b_end)`` pairs starting from ``b = B``.
    """

    A: float
    B: float
    segments: tuple = ()

    def __post_init__(self):
        if not 0 < self.A < self.B:
            raise GeometryError("need 0 < A < B")
        b_min = (self.B ** 3 - self.A ** 3) ** (1.0 / 3.0)
        for d, b in self.segments:
            if not d > 0:
                raise GeometryError("segment durations must be positive")
            if not b > b_min:
                raise GeometryError(f"b = {b} collapses the cavity (need b > {b_min:.6g})")

    @classmethod
    def ramp(cls, A, B, rate, t_end):
        """``b(t) = B (1 + rate t)`` up to ``t_end``."""
        return cls(A, B, ((t_end, B * (1.0 + rate * t_end)),))

    @property
    def end_time(self):
        return sum(d for d, _ in self.segments)

    def b(self, t):
        t = np.asarray(t, dtype=float)
        knots_t = np.concatenate([[0.0], np.cumsum([d for d, _ in self.segments])])
        knots_b = np.concatenate([[self.B], [b for _, b in self.segments]])
        return np.interp(t, knots_t, knots_b)


@dataclass
class GaussGrid:
    """Gauss-Legendre points on ``[A, B]`` with a viscous stretch per point."""

    R: np.ndarray
    w: np.ndarray
    lv: np.ndarray = field(default=None)

    def __post_init__(self):
        if len(self.R) < 2:
            raise ValueError("need at least two Gauss points")
        if self.lv is None:
            self.lv = np.ones(len(self.R))

    @classmethod
    def on(cls, A, B, n):
        R, w = gauss_legendre(n, A, B)
        return cls(R, w)


def lambda_field(R, t, geometry):
    """Hoop stretch ``(1 + (b^3 - B^3)/R^3)^(1/3)``."""
    R = np.asarray(R, dtype=float)
    b = geometry.b(t)
    arg = 1.0 + (b ** 3 - geometry.B ** 3) / R ** 3
    if np.any(arg <= 0):
        raise GeometryError("cube-root argument non-positive; the cavity has collapsed")
    return np.cbrt(arg)


def _tensor_state(lam, lv):
    n = len(lam)
    F = np.zeros((n, 3, 3))
    F[:, 0, 0] = F[:, 1, 1] = lam
    F[:, 2, 2] = lam ** -2
    D = np.zeros((n, 6))
    D[:, 0] = D[:, 1] = lv ** -2
    D[:, 2] = lv ** 4
    return F, D


def _n_sub(lam, lv, dt, params, safety):
    F, D = _tensor_state(lam, lv)
    tau = float(np.min(kernels.time_scale(F, D, params.as_array())))
    if not math.isfinite(tau):
        return 1
    return max(1, math.ceil(dt / (safety * 1e-2 * tau) - 1e-9))


def _march(R, lv, t0, t1, geometry, params, nsub):
    p = params.as_array()
    h = (t1 - t0) / nsub
    fr = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    status = np.zeros(len(R), dtype=np.int64)
    for k in range(nsub):
        ts = t0 + h * (k + fr)
        stages = np.stack([lambda_field(R, t, geometry) for t in ts], axis=-1)
        lv_new, st = kernels.rk5_scalar(stages, lv, h, p)
        good = (status == 0) & (st == 0)
        lv = np.where(good, lv_new, lv)
        status = np.where(status == 0, st, status)
    return lv, status


def evolve_shell_state(grid, times, geometry, params, safety=1.0):
    """Integrate ``lv`` at every grid point along ``times``.

    The hoop stretch is evaluated exactly at each Runge-Kutta stage time
    (it is known in closed form), and each interval is sub-stepped so the
    step stays below ``safety * 1e-2 * tau``.  Returns the ``(nt, n)``
    history and leaves ``grid.lv`` at the final time.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    R = np.asarray(grid.R, dtype=float)
    lv = np.array(grid.lv, dtype=float)
    out = np.empty((len(times), len(R)))
    out[0] = lv
    for k in range(1, len(times)):
        t0, t1 = times[k - 1], times[k]
        nsub = _n_sub(lambda_field(R, t0, geometry), lv, t1 - t0, params, safety)
        for _ in range(MAX_HALVINGS + 1):
            new, status = _march(R, lv, t0, t1, geometry, params, nsub)
            if not status.any():
                break
            nsub *= 2
        else:
            bad = np.flatnonzero(status)
            _raise_for(status, f"shell point R = {R[bad[0]]!r} at t = {t1}")
        lv = new
        out[k] = lv
    grid.lv = lv
    return out


def _dpsi(x, c1, c2, e1, e2):
    return 0.5 * c1 * (x / 3.0) ** (e1 - 1.0) + 0.5 * c2 * (x / 3.0) ** (e2 - 1.0)


def energy_derivatives(lam, lv, params):
    """``dW_eq/dlambda`` and ``dW_neq/dlambda`` at fixed ``lv``."""
    p = params
    I1 = (1.0 + 2.0 * lam ** 6) / lam ** 4
    I1e = (2.0 * lam ** 6 + lv ** 6) / (lam ** 4 * lv ** 2)
    d_eq = _dpsi(I1, p.mu1, p.mu2, p.alpha1, p.alpha2)
    d_neq = _dpsi(I1e, p.m1, p.m2, p.a1, p.a2)
    dW_eq = d_eq * (4.0 * lam - 4.0 * lam ** -5)
    dW_neq = d_neq * (4.0 * lam / lv ** 2 - 4.0 * lv ** 4 / lam ** 5)
    return dW_eq, dW_neq


def outer_pressure(t, grid, geometry, params, lv=None):
    """Outer nominal pressure ``P(t)`` by Gauss quadrature (kPa).

    ``lv`` defaults to ``grid.lv``, which must be synchronized with ``t``.
    """
    lv = grid.lv if lv is None else np.asarray(lv, dtype=float)
    lam = lambda_field(grid.R, t, geometry)
    dW_eq, dW_neq = energy_derivatives(lam, lv, params)
    g = grid.w / (grid.R * lam * lam)
    b = geometry.b(t)
    return float(b * b / geometry.B ** 2 * (np.sum(g * dW_eq) + np.sum(g * dW_neq)))


def pressure_history(times, geometry, params, n=100, safety=1.0):
    """``P`` at every time of ``times`` with ``n`` Gauss points."""
    grid = GaussGrid.on(geometry.A, geometry.B, n)
    hist = evolve_shell_state(grid, times, geometry, params, safety)
    return np.array([outer_pressure(t, grid, geometry, params, lv)
                     for t, lv in zip(times, hist)])


def stress_fields(R, times, geometry, params, n=100, safety=1.0):
    """Radial and hoop Piola stresses ``(s1, s2)`` at radii ``R`` at ``times[-1]``.

    The radial integral from ``A`` to each ``R`` is evaluated with its own
    ``n``-point Gauss rule, and the viscous stretch is integrated at all of
    those points together with the points ``R`` themselves.
    """
    R = np.atleast_1d(np.asarray(R, dtype=float))
    if np.any(R < geometry.A) or np.any(R > geometry.B):
        raise GeometryError("radii must lie in [A, B]")
    t = float(times[-1])
    nodes, weights = [], []
    for Ri in R:
        z, w = gauss_legendre(n, geometry.A, Ri)
        nodes.append(z)
        weights.append(w)
    pts = np.concatenate(nodes + [R])
    grid = GaussGrid(pts, np.zeros_like(pts))
    evolve_shell_state(grid, times, geometry, params, safety)
    lv_all = grid.lv
    lam_all = lambda_field(pts, t, geometry)
    dW_eq, dW_neq = energy_derivatives(lam_all, lv_all, params)
    integrand = (dW_eq + dW_neq) / (pts * lam_all ** 2)
    s1 = np.empty(len(R))
    for i in range(len(R)):
        sl = slice(i * n, (i + 1) * n)
        s1[i] = np.sum(weights[i] * integrand[sl])
    lam = lam_all[-len(R):]
    lv = lv_all[-len(R):]
    s1 *= lam ** 2
    p = params
    I1 = (1.0 + 2.0 * lam ** 6) / lam ** 4
    I1e = (2.0 * lam ** 6 + lv ** 6) / (lam ** 4 * lv ** 2)
    s2 = (s1 / lam ** 3
          + 2.0 * _dpsi(I1, p.mu1, p.mu2, p.alpha1, p.alpha2) * (lam - lam ** -5)
          + 2.0 * _dpsi(I1e, p.m1, p.m2, p.a1, p.a2) * (lam / lv ** 2 - lv ** 4 / lam ** 5))
    return s1, s2
