"""Small-tensor helpers.

Symmetric second-order tensors are stored as six components in the order
(11, 22, 33, 12, 13, 23) with no weighting factor on the shear entries.
General second-order tensors are plain ``(3, 3)`` arrays.
"""

import numpy as np

# (row, col) of each stored component
SYM_INDEX = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
# stored slot of each (row, col) pair
SYM_SLOT = np.array([[0, 3, 4],
                     [3, 1, 5],
                     [4, 5, 2]])
# contraction weights: shear slots count twice in A:B
SYM_WEIGHT = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])

IDENTITY6 = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


def sym_to_mat(s):
    """Expand ``(..., 6)`` symmetric storage to ``(..., 3, 3)``."""
    s = np.asarray(s, dtype=float)
    return s[..., SYM_SLOT]


def mat_to_sym(m):
    """Compress the symmetric part of ``(..., 3, 3)`` into ``(..., 6)``."""
    m = np.asarray(m, dtype=float)
    m = 0.5 * (m + np.swapaxes(m, -1, -2))
    return np.stack([m[..., i, j] for i, j in SYM_INDEX], axis=-1)


def as_mat(a):
    """Accept either a Sym3 (6,) or a (3, 3) array and return (3, 3)."""
    a = np.asarray(a, dtype=float)
    if a.shape[-1] == 6 and (a.ndim == 1 or a.shape[-2:] != (3, 3)):
        return sym_to_mat(a)
    return a


def sym_dot(a, b):
    """Full tensor contraction A:B of two Sym3 arrays."""
    return np.sum(SYM_WEIGHT * np.asarray(a) * np.asarray(b), axis=-1)


def tensor4_to_voigt(L):
    """Pack a minor-symmetric ``(3, 3, 3, 3)`` tensor into a 6x6 array.

    Entry ``[I, J]`` holds ``L[i, j, k, l]`` for the stored index pairs, with
    no shear factors; use :func:`voigt_contract` to apply it to a Sym3.
    """
    L = np.asarray(L)
    out = np.empty(L.shape[:-4] + (6, 6))
    for I, (i, j) in enumerate(SYM_INDEX):
        for K, (k, l) in enumerate(SYM_INDEX):
            out[..., I, K] = L[..., i, j, k, l]
    return out


def voigt_to_tensor4(L6):
    L6 = np.asarray(L6)
    return L6[..., SYM_SLOT[:, :, None, None], SYM_SLOT[None, None, :, :]]


def voigt_contract(L6, e):
    """Compute ``L : e`` for a 6x6 tangent and a Sym3 increment ``e``.

    The shear columns are doubled so the result equals the full tensor
    contraction ``L_ijkl e_kl``.
    """
    return np.asarray(L6) @ (SYM_WEIGHT * np.asarray(e))


def det_sym(s):
    s = np.asarray(s)
    a, b, c, d, e, f = (s[..., i] for i in range(6))
    return a * b * c + 2.0 * d * e * f - a * f * f - b * e * e - c * d * d


def is_spd_sym(s):
    """Sylvester test on Sym3 storage."""
    s = np.asarray(s)
    m1 = s[..., 0]
    m2 = s[..., 0] * s[..., 1] - s[..., 3] ** 2
    return (m1 > 0.0) & (m2 > 0.0) & (det_sym(s) > 0.0)


def random_rotation(rng):
    """Uniformly distributed proper rotation."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_unimodular_spd(rng, spread=0.3):
    """Random SPD matrix with unit determinant, as (3, 3)."""
    Q = random_rotation(rng)
    lam = np.exp(rng.uniform(-spread, spread, size=3))
    lam /= np.prod(lam) ** (1.0 / 3.0)
    return (Q * lam) @ Q.T


def random_deformation(rng, spread=0.3):
    """Random deformation gradient with positive determinant."""
    F = np.eye(3) + rng.uniform(-spread, spread, size=(3, 3))
    while np.linalg.det(F) <= 0.2:
        F = np.eye(3) + rng.uniform(-spread, spread, size=(3, 3))
    return F
