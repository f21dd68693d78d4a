"""Backend selection for the batched per-point kernels.

The compiled extension ``finvisc._kernels`` is used when it imports; the
vectorised numpy module ``finvisc._pykernels`` is the fallback.  Both expose
``flow_rate``, ``time_scale``, ``rk5_march``, ``stress_tangent`` and
``rk5_scalar`` with identical signatures and status codes.
"""

from contextlib import contextmanager

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

OK, BAD_F, BAD_STEP, BAD_ETA = (_pykernels.OK, _pykernels.BAD_F,
                                _pykernels.BAD_STEP, _pykernels.BAD_ETA)

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

_active = _compiled if _compiled is not None else _pykernels


def backend_name():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use_backend(name):
    """Switch the process-wide backend (``"compiled"`` or ``"python"``)."""
    global _active
    try:
        _active = BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


@contextmanager
def backend(name):
    prev = backend_name()
    use_backend(name)
    try:
        yield
    finally:
        use_backend(prev)


def flow_rate(F, Dv, p):
    return _active.flow_rate(F, Dv, p)


def time_scale(F, Dv, p):
    return _active.time_scale(F, Dv, p)


def rk5_march(F0, F1, Dv0, dt, p, nsub=1):
    return _active.rk5_march(F0, F1, Dv0, dt, p, nsub)


def stress_tangent(F, Dv, q, p, tangent=True):
    return _active.stress_tangent(F, Dv, q, p, tangent)


def rk5_scalar(lam_stages, lv0, dt, p):
    return _active.rk5_scalar(lam_stages, lv0, dt, p)
