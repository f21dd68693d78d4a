"""Residual and tangent of the mixed displacement-pressure weak form.

Unknowns are the nodal displacements (three per quadratic node) followed
by the vertex pressures.  With ``Dv`` frozen at the quadrature points the
discrete equations are

    R_u = int S : grad N dV - f_ext,
    R_q = int (J - 1 - q / kappa) N_q dV,

and the consistent tangent is symmetric.  The material part uses the
batched ``dS/dF`` kernel, which already contains the geometric and
pressure terms of the total-Lagrangian linearization.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .. import kernels
from ..errors import InvalidDeformationError
from .elements import face_points, p1_shape, p2_grad, p2_shape
from .quadrature import tet_rule, tri_rule

_CHUNK = 2048


@dataclass
class DirichletBC:
    """Prescribed displacement component on a node list.

    ``value(t, X)`` returns the displacement of each node (``X`` is the
    ``(n, 3)`` array of their reference coordinates); ``None`` means zero.
    """

    nodes: np.ndarray
    component: int
    value: object = None

    def values(self, t, X):
        if self.value is None:
            return np.zeros(len(self.nodes))
        return np.asarray(self.value(t, X[self.nodes]), dtype=float).reshape(-1)


@dataclass
class TractionBC:
    """Nominal (dead) traction ``value(t, X) -> (n, 3)`` on a facet set."""

    facet_set: str
    value: object


@dataclass
class BVPConfig:
    """Boundary-value problem definition.

    ``params`` is one :class:`~finvisc.material.MaterialParams` or a
    sequence of them selected per element by ``element_material``.
    """

    mesh: object
    params: object
    dirichlet: list
    times: np.ndarray
    tractions: list = field(default_factory=list)
    body_force: object = None
    element_material: np.ndarray = None
    tol1: float = 1e-8
    tol2: float = 1e-9
    safety: float = 1.0
    tracked_facets: tuple = ()
    threads: int = 1

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if not self.dirichlet:
            raise ValueError("at least one Dirichlet condition is needed")
        if not isinstance(self.params, (list, tuple)):
            self.params = [self.params]
        if self.element_material is None:
            self.element_material = np.zeros(self.mesh.n_elements, dtype=np.int64)


class DofMap:
    """Global numbering and the free/constrained split."""

    def __init__(self, mesh, dirichlet):
        self.n_u = 3 * mesh.n_nodes
        self.n_q = mesh.n_vertices
        self.n = self.n_u + self.n_q
        dofs = [3 * np.asarray(bc.nodes, dtype=np.int64) + bc.component for bc in dirichlet]
        self.constrained = np.unique(np.concatenate(dofs)) if dofs else np.zeros(0, np.int64)
        mask = np.ones(self.n, dtype=bool)
        mask[self.constrained] = False
        self.free = np.flatnonzero(mask)
        self.free_index = np.full(self.n, -1, dtype=np.int64)
        self.free_index[self.free] = np.arange(len(self.free))
        t = mesh.tets
        udofs = (3 * t[:, :, None] + np.arange(3)).reshape(len(t), 30)
        qdofs = self.n_u + mesh.pressure_index[t[:, :4]]
        self.element_dofs = np.concatenate([udofs, qdofs], axis=1)

    @property
    def n_free(self):
        return len(self.free)


@dataclass
class QPState:
    """Internal variable at the volume points, plus the tracked facet points."""

    Dv: np.ndarray
    facet_Dv: dict = field(default_factory=dict)


class Assembler:
    """Precomputed geometry and sparsity for one mesh and constraint set."""

    def __init__(self, cfg):
        self.cfg = cfg
        mesh = cfg.mesh
        self.mesh = mesh
        self.dofs = DofMap(mesh, cfg.dirichlet)
        xi, w = tet_rule()
        self.nq = len(w)
        G = p2_grad(xi)
        Xe = mesh.X[mesh.tets]
        Jm = np.einsum("eai,qaj->eqij", Xe, G)
        det = np.linalg.det(Jm)
        if np.any(det <= 0):
            bad = int(np.flatnonzero(np.min(det, axis=1) <= 0)[0])
            raise InvalidDeformationError(f"reference Jacobian non-positive in element {bad}")
        self.dNdX = np.einsum("qaJ,eqJj->eqaj", G, np.linalg.inv(Jm))
        self.wdet = det * w / 6.0
        self.Nq = p1_shape(xi)
        self.N = p2_shape(xi)
        self.volume = float(self.wdet.sum())
        self.length = self.volume ** (1.0 / 3.0)
        mu0 = max(p.mu0 for p in cfg.params)
        self.scale_u = 1.0 / (mu0 * self.length ** 2)
        self.scale_q = 1.0 / self.length ** 3
        self.group = np.repeat(np.asarray(cfg.element_material), self.nq)
        self._build_pattern()
        self.facets = {name: self._facet_geometry(name) for name in
                       set(cfg.tracked_facets) | {tb.facet_set for tb in cfg.tractions}}
        self.f_body = self._body_load()

    def _build_pattern(self):
        ed = self.dofs.element_dofs
        nf = self.dofs.n_free
        fi = self.dofs.free_index[ed]
        rows = np.repeat(fi[:, :, None], ed.shape[1], axis=2)
        cols = np.repeat(fi[:, None, :], ed.shape[1], axis=1)
        mask = (rows >= 0) & (cols >= 0)
        key = rows[mask] * nf + cols[mask]
        ukey, inv = np.unique(key, return_inverse=True)
        self._mask = mask
        self._inv = inv.reshape(-1)
        self._indices = ukey % nf
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(ukey // nf, minlength=nf))])
        self._nnz = len(ukey)

    def _facet_geometry(self, name):
        mesh = self.mesh
        ef = mesh.facet_elements(name)
        st, w = tri_rule()
        out = {"elements": ef[:, 0], "dNdX": [], "N": [], "Nq": [], "NdA": [], "X": []}
        for e, f in ef:
            xi, ds, dt_ = face_points(f, st)
            G = p2_grad(xi)
            Xe = mesh.X[mesh.tets[e]]
            Jm = np.einsum("ai,qaj->qij", Xe, G)
            tang_s = Jm @ ds
            tang_t = Jm @ dt_
            out["dNdX"].append(np.einsum("qaJ,qJj->qaj", G, np.linalg.inv(Jm)))
            out["N"].append(p2_shape(xi))
            out["Nq"].append(p1_shape(xi))
            out["NdA"].append(0.5 * w[:, None] * np.cross(tang_s, tang_t))
            out["X"].append(p2_shape(xi) @ Xe)
        return {k: (np.array(v) if k != "elements" else v) for k, v in out.items()}

    def _body_load(self):
        f = np.zeros(self.dofs.n)
        if self.cfg.body_force is None:
            return f
        Xq = np.einsum("qa,eai->eqi", self.N, self.mesh.X[self.mesh.tets])
        b = np.asarray(self.cfg.body_force(Xq.reshape(-1, 3))).reshape(Xq.shape)
        fe = np.einsum("eq,qa,eqi->eai", self.wdet, self.N, b).reshape(len(b), 30)
        np.add.at(f, self.dofs.element_dofs[:, :30], fe)
        return f

    def external_force(self, t):
        f = self.f_body.copy()
        for tb in self.cfg.tractions:
            g = self.facets[tb.facet_set]
            tr = np.asarray(tb.value(t, g["X"].reshape(-1, 3))).reshape(g["X"].shape)
            area = np.linalg.norm(g["NdA"], axis=2)
            fe = np.einsum("fq,fqa,fqi->fai", area, g["N"], tr).reshape(len(area), 30)
            np.add.at(f, self.dofs.element_dofs[g["elements"], :30], fe)
        return f

    def split(self, z):
        u = z[:self.dofs.n_u].reshape(-1, 3)
        q = z[self.dofs.n_u:]
        return u, q

    def deformation(self, z, elements=None, dNdX=None):
        """Deformation gradient ``(ne, nq, 3, 3)`` at the volume points."""
        u, _ = self.split(z)
        el = slice(None) if elements is None else elements
        ue = u[self.mesh.tets[el]]
        G = self.dNdX[el] if dNdX is None else dNdX
        return np.eye(3) + np.einsum("eai,eqaJ->eqiJ", ue, G)

    def pressure(self, z, elements=None, Nq=None):
        _, q = self.split(z)
        el = slice(None) if elements is None else elements
        qe = q[self.mesh.pressure_index[self.mesh.tets[el, :4]]]
        if Nq is None:
            return qe @ self.Nq.T
        return np.einsum("eb,eqb->eq", qe, Nq)

    def stress(self, F, Dv, q, groups, tangent):
        """Batched hybrid stress (and tangent), dispatched per material."""
        n = len(F)
        S = np.empty((n, 3, 3))
        A = np.empty((n, 3, 3, 3, 3)) if tangent else None
        status = np.zeros(n, dtype=np.int64)
        for g, params in enumerate(self.cfg.params):
            sel = np.flatnonzero(groups == g)
            if sel.size == 0:
                continue
            s, a, st = kernels.stress_tangent(F[sel], Dv[sel], q[sel], params.as_array(),
                                              tangent)
            S[sel] = s
            status[sel] = st
            if tangent:
                A[sel] = a
        return S, A, status

    def _chunk(self, e0, e1, z, Dv, tangent):
        nq = self.nq
        F = self.deformation(z, slice(e0, e1)).reshape(-1, 3, 3)
        q = self.pressure(z, slice(e0, e1)).reshape(-1)
        D = Dv[e0 * nq:e1 * nq]
        grp = self.group[e0 * nq:e1 * nq]
        S, A, status = self.stress(F, D, q, grp, tangent)
        if np.any(status):
            bad = e0 + int(np.flatnonzero(status)[0]) // nq
            raise InvalidDeformationError(f"det F <= 0 in element {bad}")
        ne = e1 - e0
        dN = self.dNdX[e0:e1].reshape(-1, 10, 3)
        wd = self.wdet[e0:e1].reshape(-1)
        J = np.linalg.det(F)
        FiT = np.swapaxes(np.linalg.inv(F), 1, 2)
        JFiT = J[:, None, None] * FiT
        Nq = np.tile(self.Nq, (ne, 1))
        kinv = np.array([0.0 if p.incompressible else 1.0 / p.kappa
                         for p in self.cfg.params])[grp]

        Ru = np.einsum("p,piJ,paJ->pai", wd, S, dN).reshape(ne, nq, 30).sum(axis=1)
        g = J - 1.0 - q * kinv
        Rq = (wd * g)[:, None] * Nq
        Rq = Rq.reshape(ne, nq, 4).sum(axis=1)
        R = np.concatenate([Ru, Rq], axis=1)
        if not tangent:
            return R, None
        # K[a,i,b,k] = sum_JL dN[a,J] A[i,J,k,L] dN[b,L], summed over points
        npt = len(F)
        T = dN @ A.transpose(0, 2, 1, 3, 4).reshape(npt, 3, 27)
        T = (wd[:, None, None] * T).reshape(npt, 90, 3) @ np.swapaxes(dN, 1, 2)
        Kuu = T.reshape(ne, nq, 10, 3, 3, 10).sum(axis=1)
        Kuu = Kuu.transpose(0, 1, 2, 4, 3).reshape(ne, 30, 30)
        v = np.einsum("paJ,piJ->pai", dN, JFiT).reshape(-1, 30)
        Kuq = wd[:, None, None] * v[:, :, None] * Nq[:, None, :]
        Kqq = -(wd * kinv)[:, None, None] * Nq[:, :, None] * Nq[:, None, :]
        Kuq = Kuq.reshape(ne, nq, 30, 4).sum(axis=1)
        K = np.empty((ne, 34, 34))
        K[:, :30, :30] = Kuu
        K[:, :30, 30:] = Kuq
        K[:, 30:, :30] = np.swapaxes(Kuq, 1, 2)
        K[:, 30:, 30:] = Kqq.reshape(ne, nq, 4, 4).sum(axis=1)
        return R, K

    def assemble(self, z, Dv, t, tangent=True, dz=None):
        """Global residual (all dofs) and the free-free tangent (CSR).

        With ``dz`` given, also returns the full tangent applied to ``dz``
        (used to carry a prescribed-displacement increment into the
        right-hand side).
        """
        ne = self.mesh.n_elements
        bounds = [(e, min(e + _CHUNK, ne)) for e in range(0, ne, _CHUNK)]
        work = lambda b: self._chunk(b[0], b[1], z, Dv, tangent)
        if self.cfg.threads > 1 and len(bounds) > 1:
            with ThreadPoolExecutor(self.cfg.threads) as pool:
                parts = list(pool.map(work, bounds))
        else:
            parts = [work(b) for b in bounds]
        Re = np.concatenate([p[0] for p in parts])
        R = np.bincount(self.dofs.element_dofs.reshape(-1), weights=Re.reshape(-1),
                        minlength=self.dofs.n)
        R -= self.external_force(t)
        if not tangent:
            return R, None
        Ke = np.concatenate([p[1] for p in parts])
        data = np.bincount(self._inv, weights=Ke[self._mask], minlength=self._nnz)
        nf = self.dofs.n_free
        K = sp.csr_matrix((data, self._indices, self._indptr), shape=(nf, nf))
        if dz is None:
            return R, K
        ed = self.dofs.element_dofs
        Kdz = np.bincount(ed.reshape(-1), weights=np.einsum("eab,eb->ea", Ke, dz[ed]).reshape(-1),
                          minlength=self.dofs.n)
        return R, K, Kdz

    def scaled_norm(self, R):
        """Dimensionless 2-norm of the free part of a residual."""
        r = R.copy()
        r[:self.dofs.n_u] *= self.scale_u
        r[self.dofs.n_u:] *= self.scale_q
        return float(np.linalg.norm(r[self.dofs.free]))
