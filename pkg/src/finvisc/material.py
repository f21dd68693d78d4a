"""Material constants for the two-potential viscoelastic model."""

import math
from dataclasses import dataclass, fields, replace

import numpy as np

INFINITE = math.inf

PARAM_NAMES = ("mu1", "mu2", "alpha1", "alpha2", "m1", "m2", "a1", "a2",
               "kappa", "eta0", "etaInf", "K1", "K2", "beta1", "beta2")


class ParameterError(ValueError):
    """Material constants violate the admissible ranges."""


@dataclass(frozen=True)
class MaterialParams:
    """All constitutive constants of one material.

    Units are kPa, s.  ``kappa`` may be :data:`INFINITE` for a fully
    incompressible material.
    """

    mu1: float
    mu2: float
    alpha1: float
    alpha2: float
    m1: float
    m2: float
    a1: float
    a2: float
    kappa: float
    eta0: float
    etaInf: float
    K1: float
    K2: float
    beta1: float
    beta2: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or math.isnan(v):
                raise ParameterError(f"{f.name} must be a number, got {v!r}")
        if self.mu1 < 0 or self.mu2 < 0 or self.mu1 + self.mu2 <= 0:
            raise ParameterError("need mu1, mu2 >= 0 and mu1 + mu2 > 0")
        if self.m1 < 0 or self.m2 < 0:
            raise ParameterError("need m1, m2 >= 0")
        for name in ("alpha1", "alpha2", "a1", "a2"):
            if getattr(self, name) == 0:
                raise ParameterError(f"{name} = 0 is not supported")
        if not self.eta0 >= self.etaInf >= 0:
            raise ParameterError("need eta0 >= etaInf >= 0")
        if self.K1 < 0 or self.K2 < 0:
            raise ParameterError("need K1, K2 >= 0")
        if not self.kappa > 0:
            raise ParameterError("kappa must be positive or infinite")

    @property
    def incompressible(self):
        return math.isinf(self.kappa)

    @property
    def mu0(self):
        """Equilibrium shear modulus at the reference state."""
        return self.mu1 + self.mu2

    def with_(self, **changes):
        return replace(self, **changes)

    def scale_viscosity(self, factor):
        """Scale eta0, etaInf and K1 together (the whole viscosity function)."""
        return replace(self, eta0=self.eta0 * factor,
                       etaInf=self.etaInf * factor, K1=self.K1 * factor)

    def as_array(self):
        """Pack into the float vector layout used by the compiled kernels."""
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    def as_dict(self):
        return {n: getattr(self, n) for n in PARAM_NAMES}


# acrylic elastomer VHB 4910; kappa is set per problem
VHB4910 = dict(mu1=13.54, mu2=1.08, alpha1=1.0, alpha2=-2.474,
               m1=5.42, m2=20.78, a1=-10.0, a2=1.948,
               eta0=7014.0, etaInf=0.1, K1=3507.0, K2=1.0,
               beta1=1.852, beta2=0.26)


def vhb4910(kappa=INFINITE):
    return MaterialParams(kappa=kappa, **VHB4910)
