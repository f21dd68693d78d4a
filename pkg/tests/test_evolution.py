import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from finvisc import constitutive as cm
from finvisc.errors import InvalidDeformationError
from finvisc.evolution import (RKStepInput, advance, rk5_scalar_step, rk5_step, suggest_dt,
                               suggest_dt_batch, viscous_stretch_rate)
from finvisc.tensors import (IDENTITY6, det_sym, mat_to_sym, random_deformation,
                             random_unimodular_spd, sym_to_mat)

import oracles

EPS = np.finfo(float).eps


def uniaxial(l):
    return np.diag([l ** -0.5, l ** -0.5, l])


def test_rest_state_is_fixed(backend, params):
    D = rk5_step(RKStepInput(np.eye(3), np.eye(3), IDENTITY6, 1.0), params)
    assert_allclose(D, IDENTITY6, atol=1e-16)


def test_determinant_preserved_to_ulps(backend, rng, params):
    for _ in range(50):
        F0 = random_deformation(rng, 0.2)
        F1 = F0 + rng.uniform(-0.01, 0.01, (3, 3))
        Dv = mat_to_sym(random_unimodular_spd(rng, 0.2))
        D = rk5_step(RKStepInput(F0, F1, Dv, 0.5), params)
        assert abs(det_sym(D) - 1.0) <= 4 * EPS


def test_step_input_validation(params):
    with pytest.raises(ValueError):
        RKStepInput(np.eye(3), np.eye(3), IDENTITY6, 0.0)
    with pytest.raises(InvalidDeformationError):
        RKStepInput(np.eye(3), np.diag([1.0, 1.0, -1.0]), IDENTITY6, 1.0)


def test_suggest_dt_at_rest(params):
    tau = params.eta0 / (params.m1 + params.m2)
    assert suggest_dt(np.eye(3), IDENTITY6, params) == pytest.approx(1e-2 * tau, rel=1e-14)
    assert suggest_dt(np.eye(3), IDENTITY6, params, safety=0.5) == pytest.approx(
        0.5e-2 * tau, rel=1e-14)


def test_suggest_dt_smaller_when_shear_thinned(params):
    assert suggest_dt(uniaxial(2.5), IDENTITY6, params) < suggest_dt(np.eye(3), IDENTITY6, params)


def test_suggest_dt_limits(params):
    elastic = params.with_(m1=0.0, m2=0.0)
    assert suggest_dt(uniaxial(1.5), IDENTITY6, elastic, dt_max=7.0) == 7.0
    fast = params.scale_viscosity(1e-20)
    assert suggest_dt(uniaxial(1.5), IDENTITY6, fast, dt_min=1e-9) == 1e-9
    F = np.array([np.eye(3), uniaxial(2.0)])
    D = np.tile(IDENTITY6, (2, 1))
    assert suggest_dt_batch(F, D, params) == suggest_dt(uniaxial(2.0), IDENTITY6, params)


def test_advance_matches_cv_oracle(backend, params):
    # stretch applied suddenly, then ramped; F is linear in t as the
    # integrator assumes, and J2 > 0 keeps the flow smooth
    F_of_t = lambda t: np.diag([1.0, 1.0, 1.5 + 0.1 * t])
    times = np.linspace(0.0, 10.0, 21)
    Cv_ref = oracles.cv_oracle(F_of_t, times, params)
    D = IDENTITY6[None]
    for k in range(1, len(times)):
        D, _ = advance(F_of_t(times[k - 1]), F_of_t(times[k]), D, times[k] - times[k - 1],
                       params)
        assert_allclose(sym_to_mat(D[0]), np.linalg.inv(Cv_ref[k]), rtol=1e-9, atol=1e-11)


def test_advance_sub_steps_large_intervals(params):
    D, nsub = advance(np.eye(3), uniaxial(1.2), IDENTITY6, 100.0, params)
    assert nsub >= 100.0 / suggest_dt(np.eye(3), IDENTITY6, params) - 1
    assert abs(det_sym(D[0]) - 1) < 1e-15


def test_advance_rejects_inverted_F(params):
    with pytest.raises(InvalidDeformationError):
        advance(np.eye(3), np.diag([1.0, 1.0, -0.5]), IDENTITY6, 1.0, params)


def test_scalar_rest_state(params):
    assert rk5_scalar_step(1.0, 1.0, 1.0, 1.0, params) == 1.0


def test_scalar_relaxes_to_held_stretch(params):
    lv, prev = 1.0, 1.0
    for _ in range(5000):
        lv = rk5_scalar_step(1.2, 1.2, lv, 2.0, params)
        assert prev <= lv <= 1.2
        prev = lv
    assert lv == pytest.approx(1.2, abs=1e-6)


def test_scalar_rate_matches_tensor_rate(params):
    for lam, lv in [(1.3, 1.1), (0.9, 1.0), (1.8, 1.2)]:
        F = np.diag([lam, lam, lam ** -2])
        Cv = np.diag([lv ** 2, lv ** 2, lv ** -4])
        expected = oracles.cv_rate(F, Cv, params)[0, 0] / (2 * lv)
        assert viscous_stretch_rate(lam, lv, params) == pytest.approx(expected, rel=1e-12)


def test_scalar_ramp_matches_dense_reference(backend, params):
    lam = lambda t: 1.0 + 0.05 * t
    times = np.linspace(0.0, 10.0, 1001)
    ref = oracles.shell_lv_oracle(lam, times, params)
    lv = 1.0
    for k in range(1, len(times)):
        lv = rk5_scalar_step(lam(times[k - 1]), lam(times[k]), lv, times[k] - times[k - 1],
                             params)
    assert lv == pytest.approx(ref[-1], rel=1e-9)


def test_scalar_vectorised(params):
    out = rk5_scalar_step(np.array([1.1, 1.2]), np.array([1.15, 1.3]), np.ones(2), 0.1, params)
    assert out.shape == (2,)
    assert out[1] == rk5_scalar_step(1.2, 1.3, 1.0, 0.1, params)


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(lv_prev=-1.0)])
def test_scalar_validation(params, kw):
    args = dict(lambda_prev=1.0, lambda_curr=1.1, lv_prev=1.0, dt=0.1)
    args.update(kw)
    with pytest.raises(ValueError):
        rk5_scalar_step(params=params, **args)


def observed_order(params, fractions, window, F33_0=1.5, rate=0.05):
    """Self-convergence order of Dv along F = diag(1, 1, F33_0 + rate t).

    Starts from Dv = I under a finite stretch so J2 stays positive; the
    viscosity is not smooth at J2 = 0.
    """
    tau = cm.time_scale(np.eye(3), np.eye(3), params)
    F_of_t = lambda t: np.diag([1.0, 1.0, F33_0 + rate * t])
    finals = []
    for m in fractions:
        n = int(round(window * m))
        D = IDENTITY6.copy()
        dt = window * tau / n
        for k in range(n):
            D = rk5_step(RKStepInput(F_of_t(k * dt), F_of_t((k + 1) * dt), D, dt), params)
        finals.append(D)
    e = [np.max(np.abs(finals[i] - finals[i + 1])) for i in range(len(finals) - 1)]
    return [math.log2(e[i] / e[i + 1]) for i in range(len(e) - 1)]


def test_fifth_order(backend, params):
    # dt = tau/100 ... tau/800 over a quarter of tau
    orders = observed_order(params, [100, 200, 400, 800], 0.25)
    assert all(4.5 <= o <= 5.5 for o in orders), orders
