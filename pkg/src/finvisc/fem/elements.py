"""Taylor-Hood P2/P1 shape functions on the reference tetrahedron.

Node order: vertices 0-3, then midside nodes on edges (0,1), (1,2),
(0,2), (0,3), (1,3), (2,3).  Reference coordinates ``xi`` map to the
barycentric coordinates ``L = (1 - xi1 - xi2 - xi3, xi1, xi2, xi3)``.
"""

import numpy as np

EDGES = ((0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3))
# local faces opposite each vertex, as (vertex triplet, edge-node triplet),
# oriented with outward normal under a positive element map
FACES = (
    ((1, 2, 3), (5, 9, 8)),
    ((0, 3, 2), (7, 9, 6)),
    ((0, 1, 3), (4, 8, 7)),
    ((0, 2, 1), (6, 5, 4)),
)
# d L / d xi
_DL = np.array([[-1.0, -1.0, -1.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0]])


def barycentric(xi):
    xi = np.atleast_2d(xi)
    return np.column_stack([1.0 - xi.sum(axis=1), xi])


def p2_shape(xi):
    """Values ``(nq, 10)`` of the quadratic shape functions."""
    L = barycentric(xi)
    N = np.empty((len(L), 10))
    N[:, :4] = L * (2.0 * L - 1.0)
    for k, (i, j) in enumerate(EDGES):
        N[:, 4 + k] = 4.0 * L[:, i] * L[:, j]
    return N


def p2_grad(xi):
    """Reference gradients ``(nq, 10, 3)`` of the quadratic shape functions."""
    L = barycentric(xi)
    G = np.empty((len(L), 10, 3))
    for i in range(4):
        G[:, i] = (4.0 * L[:, i] - 1.0)[:, None] * _DL[i]
    for k, (i, j) in enumerate(EDGES):
        G[:, 4 + k] = 4.0 * (L[:, i, None] * _DL[j] + L[:, j, None] * _DL[i])
    return G


def p1_shape(xi):
    """Values ``(nq, 4)`` of the linear pressure shape functions."""
    return barycentric(xi)


def face_points(face, st):
    """Element reference coordinates of points ``st`` on a local face.

    ``st`` are ``(s, t)`` coordinates on the reference triangle spanned by
    the face's vertices ``(v0, v1, v2)`` as ``v0 + s (v1 - v0) + t (v2 - v0)``.
    Returns ``(xi, dxi_ds, dxi_dt)``.
    """
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                      [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    v0, v1, v2 = (verts[k] for k in FACES[face][0])
    st = np.atleast_2d(st)
    xi = v0 + st[:, :1] * (v1 - v0) + st[:, 1:] * (v2 - v0)
    return xi, v1 - v0, v2 - v0
