"""P1 discretisation of F(u) = 1/2 int |grad u|^2 + int W(u) with lumped potential term."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import MeshMismatchError, PreconditionError
from .mesh import TriMesh, _tag
from .potential import Potential


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values bound to one mesh through its identity token."""

    values: np.ndarray
    token: str

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise PreconditionError("field values must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise PreconditionError("field has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def with_values(self, values) -> Field:
        return Field(values, self.token)

    def save_csv(self, path) -> None:
        write_field_csv(self, path)


def write_field_csv(u: Field, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "value"])
        for i, v in enumerate(u.values):
            w.writerow([i, f"{v:.17g}"])


def read_field_csv(path, token: str) -> Field:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    idx = np.array([int(r["node"]) for r in rows])
    vals = np.empty(len(rows))
    vals[idx] = [float(r["value"]) for r in rows]
    return Field(vals, token)


class DiscreteOperator:
    """Assembled Neumann stiffness K and lumped mass m of a mesh."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        rows, cols, vals, mass, areas, grads = kernels.assemble_p1(mesh.nodes, mesh.triangles)
        n = mesh.n_nodes
        K = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        K.sum_duplicates()
        K.sort_indices()
        self.K = K
        self._indptr = K.indptr.astype(np.int32)
        self._indices = K.indices.astype(np.int32)
        self.mass = mass
        self.areas = areas
        self.grads = grads
        self._region_mass: dict[int, np.ndarray] = {}

    @property
    def token(self) -> str:
        return self.mesh.token

    @property
    def area(self) -> float:
        return float(self.mass.sum())

    def field(self, values) -> Field:
        v = np.asarray(values, dtype=float)
        if v.ndim == 0:
            v = np.full(self.mesh.n_nodes, float(v))
        if v.size != self.mesh.n_nodes:
            raise MeshMismatchError(f"{v.size} values for a mesh with {self.mesh.n_nodes} nodes")
        return Field(v, self.token)

    def values(self, u) -> np.ndarray:
        """Raw array of ``u`` after checking it belongs to this mesh."""
        if isinstance(u, Field):
            if u.token != self.token:
                raise MeshMismatchError(f"field on mesh {u.token} used with operator on mesh {self.token}")
            return u.values
        v = np.asarray(u, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise MeshMismatchError(f"array of shape {v.shape} does not match {self.mesh.n_nodes} nodes")
        return v

    def region_mass(self, region) -> np.ndarray:
        tag = _tag(region)
        if tag not in self._region_mass:
            sel = self.mesh.tags == tag
            m = np.zeros(self.mesh.n_nodes)
            np.add.at(m, self.mesh.triangles[sel].reshape(-1), np.repeat(self.areas[sel] / 3.0, 3))
            self._region_mass[tag] = m
        return self._region_mass[tag]

    # -- linear algebra -------------------------------------------------------

    def stiffness_apply(self, u) -> np.ndarray:
        """K u in difference form, so constants are annihilated exactly."""
        return kernels.stiffness_apply(self._indptr, self._indices, self.K.data, np.ascontiguousarray(self.values(u)))

    def triangle_gradients(self, u) -> np.ndarray:
        v = self.values(u)
        return np.einsum("tad,ta->td", self.grads, v[self.mesh.triangles])

    def dirichlet_density(self, u) -> np.ndarray:
        """Per-triangle Dirichlet energy 1/2 |grad u|^2 |T|."""
        g = self.triangle_gradients(u)
        return 0.5 * self.areas * np.einsum("td,td->t", g, g)

    # -- energy and derivatives ----------------------------------------------

    def energy(self, p: Potential, u) -> float:
        v = self.values(u)
        return float(self.dirichlet_density(v).sum() + self.mass @ p.w(v))

    def energy_parts(self, p: Potential, u) -> dict:
        v = self.values(u)
        dens = self.dirichlet_density(v)
        wv = p.w(v)
        out = {"dirichlet": float(dens.sum()), "potential": float(self.mass @ wv)}
        for name in ("left", "neck", "right"):
            sel = self.mesh.tags == _tag(name)
            out[f"{name}_dirichlet"] = float(dens[sel].sum())
            out[f"{name}_potential"] = float(self.region_mass(name) @ wv)
            out[f"{name}_energy"] = out[f"{name}_dirichlet"] + out[f"{name}_potential"]
        out["total"] = out["dirichlet"] + out["potential"]
        return out

    def gradient(self, p: Potential, u) -> np.ndarray:
        v = self.values(u)
        return self.stiffness_apply(v) + self.mass * p.dw(v)

    def residual_norm(self, p: Potential, u=None, g=None) -> float:
        """Mass-weighted dual norm (sum g_i^2 / m_i)^(1/2) of the gradient."""
        if g is None:
            g = self.gradient(p, u)
        return float(np.sqrt(np.sum(g * g / self.mass)))

    def tol_crit(self, factor: float = 1e-9) -> float:
        return factor * np.sqrt(self.area)

    def hessian_apply(self, p: Potential, u, phi) -> np.ndarray:
        v = self.values(u)
        f = self.values(phi)
        return self.K @ f + self.mass * p.ddw(v) * f

    def jacobian(self, p: Potential, u) -> sp.csr_matrix:
        v = self.values(u)
        J = self.K + sp.diags(self.mass * p.ddw(v), format="csr")
        J.sort_indices()
        return J.tocsr()

    # -- probes and local quantities -----------------------------------------

    def probe(self, u, points) -> np.ndarray | float:
        v = self.values(u)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        t, lam = self.mesh.locate(pts)
        out = np.einsum("qa,qa->q", lam, v[self.mesh.triangles[t]])
        return float(out[0]) if np.ndim(points) == 1 else out

    def local_energy(self, u, center, radius: float) -> float:
        """Dirichlet energy of the triangles whose barycentre lies in the ball."""
        if radius <= 0:
            raise PreconditionError("radius must be positive")
        c = np.asarray(center, dtype=float)
        inside = np.hypot(*(self.mesh.centroids() - c).T) < radius
        return float(self.dirichlet_density(u)[inside].sum())

    def region_L1_distance(self, u, region, constant: float) -> float:
        v = self.values(u)
        return float(self.region_mass(region) @ np.abs(v - constant))

    def L1_distance(self, u, w) -> float:
        return float(self.mass @ np.abs(self.values(u) - self.values(w)))

    def L2_distance(self, u, w) -> float:
        d = self.values(u) - self.values(w)
        return float(np.sqrt(self.mass @ (d * d)))

