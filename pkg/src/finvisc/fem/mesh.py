"""Quadratic tetrahedral meshes: structured generators, checks and text I/O.

Structured meshes are built on a logical grid at half the vertex spacing,
so every quadratic node, midside nodes included, is a grid point.  Each
grid cell of 2x2x2 half-cells is split into six tetrahedra sharing the
cell's main diagonal, which is conforming across neighbouring cells.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import GeometryError
from .elements import EDGES, FACES, p2_grad
from .quadrature import tet_rule

_KUHN_PERMS = tuple(itertools.permutations(range(3)))
_ROUND = 1e-10


@dataclass
class Mesh:
    """Ten-node tetrahedral mesh.

    ``X`` holds all node coordinates, ``tets`` the ``(ne, 10)``
    connectivity in the element node order, and ``facet_sets`` maps a
    label to ``(nf, 3)`` vertex-node triplets of boundary faces.
    """

    X: np.ndarray
    tets: np.ndarray
    facet_sets: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.tets = np.asarray(self.tets, dtype=np.int64)
        self.facet_sets = {k: np.asarray(v, dtype=np.int64).reshape(-1, 3)
                           for k, v in self.facet_sets.items()}
        verts = np.unique(self.tets[:, :4])
        self.pressure_index = np.full(len(self.X), -1, dtype=np.int64)
        self.pressure_index[verts] = np.arange(len(verts))
        self.vertex_nodes = verts
        self._face_lookup = None

    @property
    def n_nodes(self):
        return len(self.X)

    @property
    def n_elements(self):
        return len(self.tets)

    @property
    def n_vertices(self):
        return len(self.vertex_nodes)

    def facet_elements(self, name):
        """Element index and local face number of every facet in a set."""
        if self._face_lookup is None:
            lut = {}
            for e, tet in enumerate(self.tets):
                for f, (vs, _) in enumerate(FACES):
                    lut[tuple(sorted(tet[list(vs)]))] = (e, f)
            self._face_lookup = lut
        out = [self._face_lookup[tuple(sorted(tri))] for tri in self.facet_sets[name]]
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    def nodes_on(self, name):
        """All quadratic nodes lying on the faces of a facet set."""
        ef = self.facet_elements(name)
        ids = [self.tets[e, list(FACES[f][0]) + list(FACES[f][1])] for e, f in ef]
        return np.unique(np.concatenate(ids)) if ids else np.zeros(0, dtype=np.int64)

    def jacobians(self):
        """Determinant of the reference-to-initial map at the volume points."""
        xi, _ = tet_rule()
        G = p2_grad(xi)
        Jm = np.einsum("eai,qaj->eqij", self.X[self.tets], G)
        return np.linalg.det(Jm)

    def check(self):
        dets = self.jacobians()
        bad = np.flatnonzero(np.min(dets, axis=1) <= 0)
        if bad.size:
            raise GeometryError(f"non-positive Jacobian in element {bad[0]}")
        return dets

    def volume(self):
        _, w = tet_rule()
        return float(np.sum(self.jacobians() * w) / 6.0)

    def mean_circumdiameter(self):
        """Mean diameter of the circumscribed spheres of the vertex tetrahedra."""
        P = self.X[self.tets[:, :4]]
        A = 2.0 * (P[:, 1:] - P[:, :1])
        rhs = np.sum(P[:, 1:] ** 2, axis=2) - np.sum(P[:, :1] ** 2, axis=2)
        c = np.linalg.solve(A, rhs[..., None])[..., 0]
        return float(np.mean(2.0 * np.linalg.norm(c - P[:, 0], axis=1)))


def _kuhn_p2(shape):
    """Connectivity of the six-tet split on a half-spacing logical grid.

    ``shape`` is the number of cells per axis.  Returns ``(ne, 10)`` flat
    indices into a ``(2n0+1, 2n1+1, 2n2+1)`` grid.
    """
    dims = tuple(2 * s + 1 for s in shape)
    flat = lambda ijk: np.ravel_multi_index(tuple(ijk.T), dims)
    tets = []
    for cell in itertools.product(*(range(s) for s in shape)):
        base = 2 * np.array(cell)
        for perm in _KUHN_PERMS:
            v = [np.zeros(3, dtype=int)]
            for axis in perm:
                nxt = v[-1].copy()
                nxt[axis] += 2
                v.append(nxt)
            if np.linalg.det(np.array([v[1], v[2], v[3]], dtype=float)) < 0:
                v[1], v[2] = v[2], v[1]
            mids = [(v[i] + v[j]) // 2 for i, j in EDGES]
            tets.append(np.array(v + mids) + base)
    tets = np.array(tets)
    return flat(tets.reshape(-1, 3)).reshape(-1, 10), dims


def _straighten(X, tets):
    """Place every midside node at the midpoint of its edge."""
    for k, (i, j) in enumerate(EDGES):
        X[tets[:, 4 + k]] = 0.5 * (X[tets[:, i]] + X[tets[:, j]])


def _orient(X, tets):
    """Swap vertices 1 and 2 of negatively oriented elements."""
    P = X[tets[:, :4]]
    vol = np.einsum("ij,ij->i", np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]),
                    P[:, 3] - P[:, 0])
    neg = vol < 0
    if np.any(neg):
        perm = [0, 2, 1, 3, 6, 5, 4, 7, 9, 8]
        tets[neg] = tets[neg][:, perm]
    return tets


def _merge(X, tets):
    """Merge nodes with coincident coordinates and drop unused ones."""
    key = np.round(X / _ROUND).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    tets = inv[tets]
    used, tets_c = np.unique(tets, return_inverse=True)
    return X[first][used], tets_c.reshape(tets.shape)


def boundary_facets(tets):
    """Vertex triplets of faces that belong to exactly one element."""
    faces = np.concatenate([tets[:, list(vs)] for vs, _ in FACES])
    key = np.sort(faces, axis=1)
    _, idx, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    return faces[idx[counts == 1]]


def _label_facets(X, facets, rules):
    sets = {name: [] for name in rules}
    for tri in facets:
        P = X[tri]
        hits = [name for name, rule in rules.items() if rule(P)]
        if len(hits) != 1:
            raise GeometryError(f"boundary facet {tri} matched {hits or 'no'} labels")
        sets[hits[0]].append(tri)
    return {k: np.array(v, dtype=np.int64).reshape(-1, 3) for k, v in sets.items()}


def generate_cube_mesh(n, distort=0.0, seed=0):
    """Unit cube split into ``6 n^3`` quadratic tetrahedra.

    ``distort`` moves vertices by up to that fraction of the spacing:
    interior vertices freely, face and edge vertices within their face or
    edge, corners not at all.  Midside nodes stay at edge midpoints.
    Facet sets: ``x0, x1, y0, y1, z0, z1``.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    tets, dims = _kuhn_p2((n, n, n))
    g = np.stack(np.meshgrid(*(np.linspace(0.0, 1.0, d) for d in dims), indexing="ij"),
                 axis=-1).reshape(-1, 3)
    X = g.copy()
    if distort > 0.0:
        rng = np.random.default_rng(seed)
        verts = np.unique(tets[:, :4])
        move = rng.uniform(-1.0, 1.0, (len(verts), 3)) * distort / n
        on_bound = np.isclose(g[verts], 0.0) | np.isclose(g[verts], 1.0)
        move[on_bound] = 0.0
        X[verts] += move
        _straighten(X, tets)
    tets = _orient(X, tets)
    X, tets = _merge(X, tets)
    tol = 1e-12
    rules = {f"{ax}{side}": (lambda P, k=k, v=float(side): np.all(np.abs(P[:, k] - v) < tol))
             for k, ax in enumerate("xyz") for side in (0, 1)}
    mesh = Mesh(X, tets, _label_facets(X, boundary_facets(tets), rules))
    mesh.check()
    return mesh


def _octant_patches():
    e = np.eye(3)
    c = np.full(3, 1.0 / 3.0)
    m = {(i, j): 0.5 * (e[i] + e[j]) for i in range(3) for j in range(3) if i != j}
    # corners ordered (origin, end of u edge, far corner, end of v edge)
    return [(e[i], m[i, (i + 1) % 3], c, m[i, (i + 2) % 3]) for i in range(3)]


def generate_shell_mesh(nr, ntheta, A=0.9, B=1.0):
    """One octant of the spherical shell ``A < |X| < B``.

    The spherical triangle of the octant is split into three curved
    quadrilaterals (one per corner), each meshed by a structured
    ``ntheta x ntheta`` grid, projected radially onto spheres and extruded
    through ``nr`` uniform layers.  Every quadratic node, midside nodes
    included, lies on the exact curved geometry.  Facet sets: ``inner``,
    ``outer``, ``sym_x``, ``sym_y``, ``sym_z`` (the planes X_i = 0).
    """
    if nr < 1 or ntheta < 1:
        raise ValueError("need nr, ntheta >= 1")
    if not 0 < A < B:
        raise GeometryError("need 0 < A < B")
    tets_local, dims = _kuhn_p2((ntheta, ntheta, nr))
    u, v, r = np.meshgrid(*(np.linspace(0.0, 1.0, d) for d in dims), indexing="ij")
    u, v, r = u.reshape(-1), v.reshape(-1), r.reshape(-1)
    Xs, Ts = [], []
    offset = 0
    for p0, p1, p2, p3 in _octant_patches():
        flat = (np.outer((1 - u) * (1 - v), p0) + np.outer(u * (1 - v), p1)
                + np.outer(u * v, p2) + np.outer((1 - u) * v, p3))
        direction = flat / np.linalg.norm(flat, axis=1, keepdims=True)
        # exact zeros on the symmetry planes
        direction[np.abs(flat) < 1e-15] = 0.0
        Xs.append(direction * (A + (B - A) * r)[:, None])
        Ts.append(tets_local + offset)
        offset += len(u)
    X = np.concatenate(Xs)
    tets = np.concatenate(Ts)
    tets = _orient(X, tets)
    X, tets = _merge(X, tets)
    tol = 1e-12
    radius = lambda P: np.linalg.norm(P, axis=1)
    rules = {
        "inner": lambda P: np.all(np.abs(radius(P) - A) < tol),
        "outer": lambda P: np.all(np.abs(radius(P) - B) < tol),
        "sym_x": lambda P: np.all(np.abs(P[:, 0]) < tol),
        "sym_y": lambda P: np.all(np.abs(P[:, 1]) < tol),
        "sym_z": lambda P: np.all(np.abs(P[:, 2]) < tol),
    }
    mesh = Mesh(X, tets, _label_facets(X, boundary_facets(tets), rules))
    mesh.check()
    return mesh


def write_mesh(mesh, path):
    """Write the plain-text mesh format (0-based ids).

    ::

        nodes <n>
        <id> <x> <y> <z>
        elements <n>
        <id> <n0> ... <n9>
        facets <name> <n>
        <a> <b> <c>
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nodes {mesh.n_nodes}\n")
        for i, x in enumerate(mesh.X):
            fh.write(f"{i} {x[0]:.17g} {x[1]:.17g} {x[2]:.17g}\n")
        fh.write(f"elements {mesh.n_elements}\n")
        for i, t in enumerate(mesh.tets):
            fh.write(f"{i} " + " ".join(str(k) for k in t) + "\n")
        for name, tris in mesh.facet_sets.items():
            fh.write(f"facets {name} {len(tris)}\n")
            for t in tris:
                fh.write(f"{t[0]} {t[1]} {t[2]}\n")


def read_mesh(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    pos = 0

    def header(word):
        nonlocal pos
        tok = lines[pos]
        if tok[0] != word:
            raise ValueError(f"line {pos + 1}: expected {word!r}, got {tok[0]!r}")
        pos += 1
        return tok

    n = int(header("nodes")[1])
    X = np.array([[float(v) for v in ln[1:4]] for ln in lines[pos:pos + n]])
    pos += n
    ne = int(header("elements")[1])
    tets = np.array([[int(v) for v in ln[1:11]] for ln in lines[pos:pos + ne]])
    pos += ne
    sets = {}
    while pos < len(lines):
        tok = header("facets")
        k = int(tok[2])
        sets[tok[1]] = np.array([[int(v) for v in ln[:3]] for ln in lines[pos:pos + k]],
                                dtype=np.int64).reshape(-1, 3)
        pos += k
    return Mesh(X, tets, sets)
