"""Homogeneous-deformation driver for a single material point.

Two control modes are supported.  In ``"prescribed"`` mode the whole
deformation gradient is a known function of time and only the internal
variable is integrated.  In ``"uniaxial"`` mode only ``F33`` is prescribed;
the lateral stretch (and, for an incompressible material, the pressure
``q``) follow from traction-free lateral faces, solved by the staggered
scheme at every time step.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import constitutive as cm
from .errors import ContractError, InvalidDeformationError, NonConvergenceError
from .evolution import advance
from .tensors import IDENTITY6, mat_to_sym

TOL1 = 1e-8
TOL2 = 1e-9
MAX_NEWTON = 50
MAX_STAGGER = 100
_FD_STEP = 1e-7


@dataclass(frozen=True)
class Segment:
    duration: float
    target: object  # F33 value or a (3, 3) gradient


@dataclass(frozen=True)
class LoadProgram:
    """Piecewise-linear loading history starting from ``F = I`` at t = 0.

    ``lateral`` fixes the lateral stretches for scalar targets in
    prescribed mode: ``"isochoric"`` (F11 = F22 = F33^-1/2) or
    ``"fixed"`` (F11 = F22 = 1).
    """

    segments: tuple
    mode: str = "prescribed"
    lateral: str = "isochoric"

    def __post_init__(self):
        if self.mode not in ("prescribed", "uniaxial"):
            raise ContractError(f"unknown control mode {self.mode!r}")
        if self.lateral not in ("isochoric", "fixed"):
            raise ContractError(f"unknown lateral rule {self.lateral!r}")
        if not self.segments:
            raise ContractError("load program needs at least one segment")
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in self.segments)
        for s in segs:
            if not s.duration > 0:
                raise ContractError("segment durations must be positive")
            if self.mode == "uniaxial" and np.ndim(s.target) != 0:
                raise ContractError("uniaxial mode takes scalar F33 targets")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def cycle(cls, peak, rate, mode="uniaxial", hold=0.0, **kw):
        """Ramp F33 from 1 to ``peak`` at ``rate`` (1/s) and back."""
        t = (peak - 1.0) / rate
        segs = [(t, peak)] + ([(hold, peak)] if hold > 0 else []) + [(t, 1.0)]
        return cls(tuple(segs), mode=mode, **kw)

    @classmethod
    def ramp(cls, peak, rate, mode="prescribed", hold=0.0, **kw):
        """Ramp F33 from 1 to ``peak`` and optionally hold."""
        segs = [((peak - 1.0) / rate, peak)] + ([(hold, peak)] if hold > 0 else [])
        return cls(tuple(segs), mode=mode, **kw)

    @property
    def end_time(self):
        return sum(s.duration for s in self.segments)

    def breakpoints(self):
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def _target_F(self, target):
        if np.ndim(target) == 2:
            return np.asarray(target, dtype=float)
        f = float(target)
        lat = f ** -0.5 if self.lateral == "isochoric" else 1.0
        return np.diag([lat, lat, f])

    def F(self, t):
        """Prescribed deformation gradient at time ``t``."""
        if self.mode != "prescribed":
            raise ContractError("F(t) is only defined in prescribed mode")
        prev = np.eye(3)
        t0 = 0.0
        for s in self.segments:
            end = self._target_F(s.target)
            if t <= t0 + s.duration:
                return prev + (t - t0) / s.duration * (end - prev)
            prev, t0 = end, t0 + s.duration
        return prev

    def F33(self, t):
        prev, t0 = 1.0, 0.0
        for s in self.segments:
            end = (float(s.target) if np.ndim(s.target) == 0
                   else float(np.asarray(s.target)[2, 2]))
            if t <= t0 + s.duration:
                return prev + (t - t0) / s.duration * (end - prev)
            prev, t0 = end, t0 + s.duration
        return prev

    def time_grid(self, dt):
        """Times with at most ``dt`` spacing that include every breakpoint."""
        out = [0.0]
        t0 = 0.0
        for s in self.segments:
            n = max(1, math.ceil(s.duration / dt - 1e-9))
            out.extend(t0 + s.duration * np.arange(1, n + 1) / n)
            t0 += s.duration
        return np.asarray(out)


@dataclass
class PointTrajectory:
    """Recorded states of a material-point run.

    ``S`` is the first Piola stress ``(n, 3, 3)``, ``T`` the Cauchy stress
    and ``Dv`` the internal variable, both as Sym3 ``(n, 6)``.
    """

    t: np.ndarray
    F: np.ndarray
    q: np.ndarray
    Dv: np.ndarray
    S: np.ndarray
    T: np.ndarray
    dissipation: np.ndarray
    iterations: np.ndarray = field(default=None)

    @property
    def F33(self):
        return self.F[:, 2, 2]

    @property
    def lambda_lat(self):
        return self.F[:, 0, 0]

    @property
    def S33(self):
        return self.S[:, 2, 2]

    @property
    def T33(self):
        return self.T[:, 2]

    def dissipated_work(self):
        """Trapezoidal estimate of the stress work along the path, per unit volume."""
        dF = np.diff(self.F, axis=0)
        Sm = 0.5 * (self.S[1:] + self.S[:-1])
        return float(np.sum(Sm * dF))

    def columns(self):
        """Column dict for CSV output."""
        return {"t": self.t, "F33": self.F33, "lambda_lat": self.lambda_lat,
                "q": self.q, "S33": self.S33, "T33": self.T33,
                "dissipation": self.dissipation}


@dataclass(frozen=True)
class PointState:
    t: float
    F: np.ndarray
    q: float
    Dv: np.ndarray
    iterations: int = 0


def _pressure(F, q, params):
    """Independent pressure for incompressible material, kappa (J - 1) otherwise."""
    if params.incompressible:
        return q
    return params.kappa * (np.linalg.det(F) - 1.0)


def trajectory_from_states(states, params):
    """Stresses, Cauchy stress and dissipation rate along recorded states."""
    n = len(states)
    F = np.array([s.F for s in states])
    Dv = np.array([s.Dv for s in states])
    q = np.array([_pressure(s.F, s.q, params) for s in states])
    S = np.empty((n, 3, 3))
    T = np.empty((n, 6))
    diss = np.empty(n)
    for k, s in enumerate(states):
        S[k] = cm.piola_stress_hybrid(s.F, s.Dv, q[k], params)
        J = np.linalg.det(s.F)
        T[k] = mat_to_sym(S[k] @ s.F.T / J)
        diss[k] = cm.dissipation_rate(s.F, s.Dv, params)
    return PointTrajectory(t=np.array([s.t for s in states]), F=F, q=q, Dv=Dv, S=S,
                           T=T, dissipation=diss,
                           iterations=np.array([s.iterations for s in states]))


def _keep(times, record_every):
    if record_every is None:
        return np.ones(len(times), dtype=bool)
    keep = np.zeros(len(times), dtype=bool)
    next_t = 0.0
    for k, t in enumerate(times):
        if t >= next_t - 1e-12 or k == len(times) - 1:
            keep[k] = True
            next_t = t + record_every
    return keep


def run_prescribed_F(program, params, dt, safety=1.0, record_every=None):
    """Integrate the internal variable along a fully prescribed F(t).

    The stress uses ``q = kappa (J - 1)``; for infinite kappa the pressure
    is indeterminate and taken as zero, so only the deviatoric response is
    reported.
    """
    if program.mode != "prescribed":
        raise ContractError("run_prescribed_F needs a prescribed-mode program")
    times = program.time_grid(dt)
    keep = _keep(times, record_every)
    F_prev = program.F(0.0)
    if not np.linalg.det(F_prev) > 0:
        raise InvalidDeformationError("det F must be positive")
    Dv = IDENTITY6.copy()
    states = [PointState(0.0, F_prev, 0.0, Dv)]
    for k in range(1, len(times)):
        F = program.F(times[k])
        if not np.linalg.det(F) > 0:
            raise InvalidDeformationError(f"det F <= 0 at t = {times[k]}")
        D, _ = advance(F_prev, F, Dv, times[k] - times[k - 1], params, safety)
        Dv = D[0]
        F_prev = F
        if keep[k]:
            states.append(PointState(times[k], F, 0.0, Dv))
    return trajectory_from_states(states, params)


def _uniaxial_F(lam_lat, F33):
    return np.diag([lam_lat, lam_lat, F33])


def _residual(x, F33, Dv, params):
    """Lateral traction (scaled by mu0) and, if incompressible, J - 1."""
    F = _uniaxial_F(x[0], F33)
    q = x[1] if params.incompressible else _pressure(F, 0.0, params)
    S = cm.piola_stress_hybrid(F, Dv, q, params)
    r = [S[0, 0] / params.mu0]
    if params.incompressible:
        r.append(np.linalg.det(F) - 1.0)
    return np.array(r)


def _jacobian(x, F33, Dv, params):
    n = len(x)
    Jm = np.empty((n, n))
    for j in range(n):
        h = _FD_STEP * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        Jm[:, j] = (_residual_scaled(xp, F33, Dv, params)
                    - _residual_scaled(xm, F33, Dv, params)) / (2 * h)
    return Jm


def _unknowns(state, params):
    x = [state.F[0, 0]]
    if params.incompressible:
        x.append(state.q / params.mu0)
    return np.array(x, dtype=float)


def _residual_scaled(x, F33, Dv, params):
    y = x.copy()
    if params.incompressible:
        y[1] = x[1] * params.mu0
    return _residual(y, F33, Dv, params)


def staggered_step(state_prev, F33, params, dt, tol1=TOL1, tol2=TOL2, safety=1.0):
    """Advance a uniaxial-stress material point by one time step.

    Each pass takes one Newton iteration on the lateral stretch (and
    pressure) with Dv frozen, then re-integrates Dv over the step with the
    updated kinematics.  Converged when the equilibrium residual is below
    ``tol1`` relative to the predictor residual (absolute floor
    ``1e-10``) and the relative change of Dv between passes is below
    ``tol2``.
    """
    x = _unknowns(state_prev, params)
    F_prev = state_prev.F
    Dv = np.asarray(state_prev.Dv, dtype=float)
    r = _residual_scaled(x, F33, Dv, params)
    r0 = float(np.max(np.abs(r)))
    target = max(tol1 * r0, 1e-10)
    history = [r0]
    for it in range(1, MAX_STAGGER + 1):
        if it > 1 or r0 > 0:
            x = x - np.linalg.solve(_jacobian(x, F33, Dv, params), r)
        F = _uniaxial_F(x[0], F33)
        if not np.linalg.det(F) > 0:
            raise InvalidDeformationError("lateral stretch went non-positive")
        D_new, _ = advance(F_prev, F, state_prev.Dv, dt, params, safety)
        D_new = D_new[0]
        dD = np.max(np.abs(D_new - Dv)) / np.max(np.abs(D_new))
        Dv = D_new
        r = _residual_scaled(x, F33, Dv, params)
        res = float(np.max(np.abs(r)))
        history.append(res)
        if res <= target and dD <= tol2:
            q = x[1] * params.mu0 if params.incompressible else _pressure(F, 0.0, params)
            return PointState(state_prev.t + dt, F, q, Dv, it)
    raise NonConvergenceError(f"staggered loop did not converge in {MAX_STAGGER} passes",
                              history)


def solve_equilibrium(F33, Dv, params, x0=None, tol=1e-12):
    """Full Newton solve of the lateral equilibrium with Dv fixed.

    Returns ``(lambda_lat, q)``.
    """
    if x0 is None:
        x0 = [F33 ** -0.5, 0.0] if params.incompressible else [1.0]
    x = np.array(x0, dtype=float)
    if params.incompressible:
        x[1] /= params.mu0
    history = []
    for _ in range(MAX_NEWTON):
        r = _residual_scaled(x, F33, Dv, params)
        history.append(float(np.max(np.abs(r))))
        if history[-1] <= tol:
            F = _uniaxial_F(x[0], F33)
            q = x[1] * params.mu0 if params.incompressible else _pressure(F, 0.0, params)
            return x[0], q
        x = x - np.linalg.solve(_jacobian(x, F33, Dv, params), r)
    raise NonConvergenceError(f"Newton did not converge in {MAX_NEWTON} iterations", history)


def run_uniaxial_stress(program, params, dt, tol1=TOL1, tol2=TOL2, safety=1.0,
                        record_every=None):
    """Uniaxial stress history with traction-free lateral faces."""
    if program.mode != "uniaxial":
        raise ContractError("run_uniaxial_stress needs a uniaxial-mode program")
    times = program.time_grid(dt)
    keep = _keep(times, record_every)
    state = PointState(0.0, np.eye(3), 0.0, IDENTITY6.copy())
    states = [state]
    for k in range(1, len(times)):
        state = staggered_step(state, program.F33(times[k]), params,
                               times[k] - times[k - 1], tol1, tol2, safety)
        # remove drift of the accumulated time
        state = PointState(times[k], state.F, state.q, state.Dv, state.iterations)
        if keep[k]:
            states.append(state)
    return trajectory_from_states(states, params)
