"""Time integration of the viscous internal variable.

A six-stage explicit fifth-order Runge-Kutta step is followed by rescaling
to unit determinant, so ``det Dv = 1`` holds to roundoff after every step.
The same tableau drives the scalar viscous stretch of the incompressible
shell.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._pykernels import _scalar_rate
from .errors import InvalidDeformationError, StepTooLargeError
from .tensors import mat_to_sym

# fraction of the step at which each stage evaluates the kinematics
STAGE_FRACTIONS = (0.0, 0.5, 0.25, 0.5, 0.75, 1.0)
MAX_HALVINGS = 10
DT_MIN = 1e-12
DT_MAX = 1e6


@dataclass(frozen=True)
class RKStepInput:
    F_prev: np.ndarray
    F_curr: np.ndarray
    Dv_prev: np.ndarray
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        for F in (self.F_prev, self.F_curr):
            if not np.linalg.det(F) > 0:
                raise InvalidDeformationError("det F must be positive")


def _as_sym(Dv):
    Dv = np.asarray(Dv, dtype=float)
    return Dv if Dv.shape == (6,) else mat_to_sym(Dv)


def _raise_for(status, what="rk5 step"):
    bad = np.flatnonzero(status)
    if bad.size == 0:
        return
    code = int(status[bad[0]])
    if code == kernels.BAD_F:
        raise InvalidDeformationError(f"{what}: non-positive det F at point {bad[0]}")
    if code == kernels.BAD_ETA:
        raise ZeroDivisionError(f"{what}: non-positive viscosity at point {bad[0]}")
    raise StepTooLargeError(f"{what}: step rejected at {bad.size} point(s), first {bad[0]}")


def rk5_step(inp, params):
    """One determinant-preserving RK5 step of Dv; returns Sym3."""
    D, status = kernels.rk5_march(inp.F_prev, inp.F_curr, _as_sym(inp.Dv_prev),
                                  inp.dt, params.as_array(), 1)
    _raise_for(status)
    return D[0]


def suggest_dt(F, Dv, params, safety=1.0, dt_min=DT_MIN, dt_max=DT_MAX):
    """Step size ``safety * 1e-2 * tau`` at the given state, clipped."""
    tau = kernels.time_scale(np.asarray(F, dtype=float), _as_sym(Dv), params.as_array())[0]
    if not math.isfinite(tau):
        return dt_max
    return min(max(safety * 1e-2 * tau, dt_min), dt_max)


def suggest_dt_batch(F, Dv, params, safety=1.0, dt_min=DT_MIN, dt_max=DT_MAX):
    """Smallest suggested step over a batch of points."""
    tau = kernels.time_scale(F, Dv, params.as_array())
    tau_min = float(np.min(tau)) if len(tau) else math.inf
    if not math.isfinite(tau_min):
        return dt_max
    return min(max(safety * 1e-2 * tau_min, dt_min), dt_max)


def advance(F_prev, F_curr, Dv_prev, dt, params, safety=1.0, nsub=None):
    """Advance a batch of points over ``dt`` with automatic sub-stepping.

    The sub-step count starts from the suggested step at the initial state
    and doubles whenever any point rejects a step, up to ``MAX_HALVINGS``
    times.  Returns ``(Dv, nsub)``.
    """
    F_prev = np.asarray(F_prev, dtype=float).reshape(-1, 3, 3)
    F_curr = np.asarray(F_curr, dtype=float).reshape(-1, 3, 3)
    Dv_prev = np.asarray(Dv_prev, dtype=float).reshape(-1, 6)
    p = params.as_array()
    if nsub is None:
        h = suggest_dt_batch(F_prev, Dv_prev, params, safety)
        nsub = max(1, math.ceil(dt / h - 1e-9))
    last = None
    for _ in range(MAX_HALVINGS + 1):
        D, status = kernels.rk5_march(F_prev, F_curr, Dv_prev, dt, p, nsub)
        if not status.any():
            return D, nsub
        if np.any(status == kernels.BAD_F):
            _raise_for(status)
        last = status
        nsub *= 2
    _raise_for(last, f"advance after {MAX_HALVINGS} halvings")


def _scalar_stages(lambda_prev, lambda_curr):
    lp = np.asarray(lambda_prev, dtype=float)
    lc = np.asarray(lambda_curr, dtype=float)
    return np.stack([lp + f * (lc - lp) for f in (0.0, 0.25, 0.5, 0.75, 1.0)], axis=-1)


def rk5_scalar_step(lambda_prev, lambda_curr, lv_prev, dt, params, stage_lambdas=None):
    """Advance the shell viscous stretch ``lv`` by one RK5 step.

    The hoop stretch is interpolated linearly between ``lambda_prev`` and
    ``lambda_curr`` unless ``stage_lambdas`` supplies its values at
    fractions (0, 1/4, 1/2, 3/4, 1) of the step.  Accepts scalars or arrays.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    lv = np.asarray(lv_prev, dtype=float)
    if np.any(lv <= 0):
        raise ValueError("lv_prev must be positive")
    stages = (_scalar_stages(lambda_prev, lambda_curr) if stage_lambdas is None
              else np.asarray(stage_lambdas, dtype=float))
    out, status = kernels.rk5_scalar(stages.reshape(-1, 5), lv.reshape(-1), dt,
                                     params.as_array())
    _raise_for(status, "rk5 scalar step")
    return out.reshape(lv.shape) if lv.ndim else float(out[0])


def viscous_stretch_rate(lam, lv, params):
    """Right-hand side of the shell viscous-stretch ODE (vectorised)."""
    rate, _ = _scalar_rate(np.asarray(lam, dtype=float), np.asarray(lv, dtype=float),
                           params.as_array())
    return rate
