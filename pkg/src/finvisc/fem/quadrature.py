"""Quadrature rules on the reference tetrahedron and triangle.

Weights are normalised to sum to one; multiply by the reference measure
(1/6 for the tetrahedron, 1/2 for the triangle).
"""

import numpy as np


def _perm_tet_a(a):
    b = 1.0 - 3.0 * a
    return [(a, a, a), (b, a, a), (a, b, a), (a, a, b)]


def _perm_tet_ab(a, b):
    return [(a, a, b), (a, b, a), (b, a, a), (a, b, b), (b, a, b), (b, b, a)]


def tet_rule():
    """14-point rule, exact for polynomials of degree 5.

    Returns ``(points, weights)``; points are ``(xi1, xi2, xi3)`` with the
    remaining barycentric coordinate ``1 - xi1 - xi2 - xi3``.
    """
    groups = [
        (_perm_tet_a(0.0927352503108912), 0.07349304311636196),
        (_perm_tet_a(0.3108859192633006), 0.11268792571801585),
        (_perm_tet_ab(0.4544962958743504, 0.0455037041256496), 0.04254602077708147),
    ]
    pts, wts = [], []
    # each orbit is symmetric, so any three barycentric coordinates serve
    for orbit, w in groups:
        pts.extend(orbit)
        wts.extend([w] * len(orbit))
    return np.array(pts), np.array(wts)


def tri_rule():
    """6-point rule on the reference triangle, exact for degree 4."""
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    pts, wts = [], []
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        for p in ((a, a), (b, a), (a, b)):
            pts.append(p)
            wts.append(w)
    return np.array(pts), np.array(wts)
