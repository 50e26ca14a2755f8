"""Graded P1 triangulations of dumbbells and truncated limit domains.

Meshing is delegated to Shewchuk's Triangle (via the ``triangle`` package):
an initial quality Delaunay mesh is refined in passes against a per-triangle
area bound derived from the sizing field until every triangle conforms.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import triangle as tr
from scipy.spatial import cKDTree

from . import kernels
from .errors import GeometryError, LocationError, MeshError, PreconditionError
from .geometry import REGION_IDS, REGION_LEFT, REGION_NAMES, REGION_NECK, REGION_RIGHT, DumbbellGeometry

AREA_FACTOR = np.sqrt(3.0) / 4.0  # area of the equilateral triangle of unit side


class MeshBudgetError(MeshError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class MeshQualityError(MeshError):
    pass


@dataclass(frozen=True)
class MeshParams:
    n_across: int = 8
    layer_ratio: float = 1.25
    h_bulk: float = 0.05
    R_layer: float | None = None
    min_angle: float = 20.0
    node_budget: int = 400_000
    max_passes: int = 40
    mirror: bool | None = None  # None: mirror whenever the geometry is symmetric

    def __post_init__(self):
        if self.n_across < 4:
            raise PreconditionError("n_across must be at least 4")
        if not 1.0 < self.layer_ratio <= 2.0:
            raise PreconditionError("layer_ratio must lie in (1, 2]")
        if self.h_bulk <= 0:
            raise PreconditionError("h_bulk must be positive")
        if not 0 < self.min_angle <= 33.0:
            raise PreconditionError("min_angle must lie in (0, 33] degrees")

    @classmethod
    def from_dict(cls, d: dict) -> MeshParams:
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass
class PlanarDomain:
    """Planar straight-line graph with tagged regions, ready for Triangle."""

    vertices: np.ndarray
    segments: np.ndarray
    region_seeds: list[tuple[float, float, int]]
    holes: list[tuple[float, float]] = field(default_factory=list)

    def as_triangle_input(self) -> dict:
        d = {
            "vertices": np.asarray(self.vertices, dtype=float),
            "segments": np.asarray(self.segments, dtype=np.int32),
            "regions": np.array([[x, y, tag, 0.0] for x, y, tag in self.region_seeds], dtype=float),
        }
        if self.holes:
            d["holes"] = np.asarray(self.holes, dtype=float)
        return d


@dataclass(frozen=True, eq=False)
class TriMesh:
    nodes: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    boundary_edges: np.ndarray
    boundary_normals: np.ndarray
    sizes: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("nodes", "triangles", "tags", "boundary_edges", "boundary_normals"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        h = hashlib.sha1()
        for arr in (self.nodes, self.triangles, self.tags):
            h.update(np.ascontiguousarray(arr).tobytes())
        object.__setattr__(self, "token", h.hexdigest()[:16])
        object.__setattr__(self, "_cache", {})

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )

    @property
    def area(self) -> float:
        return float(self.areas().sum())

    def region_area(self, region) -> float:
        return float(self.areas()[self.tags == _tag(region)].sum())

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def node_regions(self) -> np.ndarray:
        """Per-node tag: a node touching any bulk triangle belongs to that bulk."""
        if "node_regions" not in self._cache:
            out = np.full(self.n_nodes, REGION_NECK, dtype=np.int64)
            for tag in (REGION_LEFT, REGION_RIGHT):
                out[np.unique(self.triangles[self.tags == tag])] = tag
            touched = np.zeros(self.n_nodes, bool)
            touched[self.triangles.reshape(-1)] = True
            out[~touched] = -1
            self._cache["node_regions"] = out
        return self._cache["node_regions"]

    def neighbors(self) -> np.ndarray:
        """``nb[t, a]``: triangle across the edge opposite local vertex a, or -1."""
        if "neighbors" not in self._cache:
            self._cache["neighbors"] = _triangle_neighbors(self.triangles)
        return self._cache["neighbors"]

    def locate(self, points, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
        """Containing triangle and barycentric weights for each point.

        Raises ``LocationError`` if a point is outside the mesh.
        """
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
        if "kdtree" not in self._cache:
            self._cache["kdtree"] = cKDTree(self.centroids())
        tree = self._cache["kdtree"]
        _, start = tree.query(pts)
        found, bary = kernels.walk_locate(
            self.nodes, self.triangles, self.neighbors(), np.asarray(start, dtype=np.int64), pts, tol, 100_000
        )
        missing = np.nonzero(found < 0)[0]
        for q in missing:
            t, lam = self._brute_locate(pts[q], tol)
            if t < 0:
                raise LocationError(f"point {pts[q].tolist()} lies outside the mesh")
            found[q], bary[q] = t, lam
        return found, bary

    def contains(self, points) -> np.ndarray:
        """Even-odd point-in-domain test against the boundary edges."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.nodes[self.boundary_edges[:, 0]]
        b = self.nodes[self.boundary_edges[:, 1]]
        out = np.zeros(len(pts), bool)
        for s in range(0, len(pts), 512):
            P = pts[s : s + 512, None, :]
            ya, yb = a[None, :, 1], b[None, :, 1]
            cross = (ya > P[..., 1]) != (yb > P[..., 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = a[None, :, 0] + (P[..., 1] - ya) * (b[None, :, 0] - a[None, :, 0]) / (yb - ya)
            out[s : s + 512] = (np.sum(cross & (P[..., 0] < xi), axis=1) % 2) == 1
        return out

    def _brute_locate(self, p, tol):
        P = self.nodes[self.triangles]
        x0, y0 = P[:, 0, 0], P[:, 0, 1]
        det = (P[:, 1, 0] - x0) * (P[:, 2, 1] - y0) - (P[:, 2, 0] - x0) * (P[:, 1, 1] - y0)
        l0 = ((P[:, 1, 0] - p[0]) * (P[:, 2, 1] - p[1]) - (P[:, 2, 0] - p[0]) * (P[:, 1, 1] - p[1])) / det
        l1 = ((P[:, 2, 0] - p[0]) * (y0 - p[1]) - (x0 - p[0]) * (P[:, 2, 1] - p[1])) / det
        l2 = 1.0 - l0 - l1
        worst = np.minimum(np.minimum(l0, l1), l2)
        t = int(np.argmax(worst))
        if worst[t] < -tol:
            return -1, None
        return t, np.array([l0[t], l1[t], l2[t]])

    def save_text(self, path) -> None:
        save_text(self, path)


def _tag(region) -> int:
    if isinstance(region, str):
        return REGION_IDS[region]
    return int(region)


def _triangle_neighbors(tris: np.ndarray) -> np.ndarray:
    nt = tris.shape[0]
    # local edge a is opposite vertex a
    e = np.stack([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1).reshape(-1, 2)
    key = np.sort(e, axis=1)
    owner = np.repeat(np.arange(nt), 3)
    local = np.tile(np.arange(3), nt)
    order = np.lexsort((key[:, 1], key[:, 0]))
    k = key[order]
    same = np.all(k[1:] == k[:-1], axis=1)
    nb = np.full((nt, 3), -1, dtype=np.int64)
    i = np.nonzero(same)[0]
    a, b = order[i], order[i + 1]
    nb[owner[a], local[a]] = owner[b]
    nb[owner[b], local[b]] = owner[a]
    return nb


def boundary_edges(tris: np.ndarray, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Edges owned by one triangle, oriented counter-clockwise, with outward unit normals."""
    nb = _triangle_neighbors(tris)
    t, a = np.nonzero(nb < 0)
    i = tris[t, (a + 1) % 3]
    j = tris[t, (a + 2) % 3]
    edges = np.column_stack([i, j]).astype(np.int64)
    d = nodes[j] - nodes[i]
    length = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    return edges, normals


def boundary_loops(edges: np.ndarray) -> list[np.ndarray]:
    """Chain oriented boundary edges into closed loops; raises if an edge dangles."""
    nxt = {}
    for i, j in edges:
        if i in nxt:
            raise MeshError(f"boundary vertex {i} starts two boundary edges")
        nxt[int(i)] = int(j)
    seen, loops = set(), []
    for s in list(nxt):
        if s in seen:
            continue
        loop = [s]
        seen.add(s)
        cur = nxt[s]
        while cur != s:
            if cur not in nxt:
                raise MeshError(f"boundary is not closed at vertex {cur}")
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(np.array(loop))
    return loops


# --- geometry -> PSLG --------------------------------------------------------


def _polyline_segments(n: int, offset: int = 0, closed: bool = True) -> np.ndarray:
    idx = np.arange(n) + offset
    if closed:
        return np.column_stack([idx, np.roll(idx, -1)])
    return np.column_stack([idx[:-1], idx[1:]])


def _vertex_index(verts: np.ndarray, p, tol=1e-14) -> int:
    d = np.abs(verts - np.asarray(p)).max(axis=1)
    i = int(np.argmin(d))
    if d[i] > tol * max(1.0, float(np.abs(p).max())):
        raise GeometryError(f"point {list(p)} is not a boundary vertex")
    return i


def dumbbell_pslg(geom: DumbbellGeometry) -> PlanarDomain:
    verts = np.asarray(geom.boundary, dtype=float)
    segs = [_polyline_segments(len(verts))]
    for side in ("left", "right"):
        a, b = geom.interfaces[side]
        segs.append(np.array([[_vertex_index(verts, a), _vertex_index(verts, b)]]))
    seeds = [(*geom.seeds[name], REGION_IDS[name]) for name in ("left", "neck", "right")]
    return PlanarDomain(verts, np.vstack(segs), seeds)


def half_dumbbell_pslg(geom: DumbbellGeometry) -> PlanarDomain:
    """The x >= 0 half of a mirror-symmetric dumbbell, closed along x = 0."""
    b = np.asarray(geom.boundary, dtype=float)
    on_axis = np.nonzero(b[:, 0] == 0.0)[0]
    if len(on_axis) != 2:
        raise GeometryError("mirror meshing needs exactly two boundary vertices on x = 0")
    i0, i1 = on_axis
    # the half with x > 0 between the two axis vertices
    n = len(b)
    fwd = [(i0 + k) % n for k in range((i1 - i0) % n + 1)]
    bwd = [(i1 + k) % n for k in range((i0 - i1) % n + 1)]
    path = fwd if np.all(b[fwd[1:-1], 0] > 0) else bwd
    if not np.all(b[path[1:-1], 0] > 0):
        raise GeometryError("boundary does not split into halves at x = 0")
    verts = b[path]
    segs = [_polyline_segments(len(verts))]  # closing segment runs along x = 0
    a, c = geom.interfaces["right"]
    segs.append(np.array([[_vertex_index(verts, a), _vertex_index(verts, c)]]))
    eps = geom.eps
    neck_seed = (0.5 * eps, geom.seeds["neck"][1])
    seeds = [(neck_seed[0], neck_seed[1], REGION_NECK), (*geom.seeds["right"], REGION_RIGHT)]
    return PlanarDomain(verts, np.vstack(segs), seeds)


# --- sizing ------------------------------------------------------------------


def dumbbell_sizing(geom: DumbbellGeometry, params: MeshParams, safety: float = 1.5) -> tuple[Callable, dict]:
    """Sizing field: h_neck in the neck, linear (geometric-layer) growth away from it."""
    neck = geom.spec.neck
    xs = np.linspace(-1, 1, 401)
    thin = float(np.min(neck.total(xs)))
    h_neck = geom.delta * thin / (safety * params.n_across)
    R = params.R_layer if params.R_layer is not None else np.sqrt(geom.delta)
    g = params.layer_ratio - 1.0
    h_layer = h_neck + g * R
    eps = geom.eps
    top = geom.delta * float(np.max(neck.f1(xs)))
    bot = geom.delta * float(np.max(neck.f2(xs)))
    h_bulk = params.h_bulk
    # beyond the layer radius the size keeps growing, faster, up to h_bulk
    g_out = max(g, 0.3)

    def h(p):
        p = np.atleast_2d(p)
        dx = np.maximum(np.abs(p[:, 0]) - eps, 0.0)
        dy = np.maximum(np.maximum(p[:, 1] - top, -bot - p[:, 1]), 0.0)
        d = np.hypot(dx, dy)
        inner = h_neck + g * np.minimum(d, R)
        outer = inner + g_out * np.maximum(d - R, 0.0)
        return np.minimum(outer, h_bulk)

    return h, {"h_neck": h_neck, "h_layer": float(min(h_layer, h_bulk)), "h_bulk": h_bulk, "R_layer": float(R)}


# --- triangulation -----------------------------------------------------------


def _target_areas(nodes, tris, sizing) -> np.ndarray:
    P = nodes[tris]
    cen = P.mean(axis=1)
    h = np.minimum.reduce([sizing(cen), sizing(P[:, 0]), sizing(P[:, 1]), sizing(P[:, 2])])
    return AREA_FACTOR * h * h


def _signed_areas(nodes, tris):
    p = nodes[tris]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def triangulate_domain(dom: PlanarDomain, sizing: Callable, params: MeshParams, h_max: float | None = None) -> dict:
    """Refine a PSLG until every triangle is below the sizing-field area bound."""
    q = f"q{params.min_angle:g}"
    h0 = h_max if h_max is not None else params.h_bulk
    cur = tr.triangulate(dom.as_triangle_input(), f"p{q}Aa{AREA_FACTOR * h0 * h0:.17g}Q")
    for _ in range(params.max_passes):
        nodes, tris = cur["vertices"], cur["triangles"]
        target = _target_areas(nodes, tris, sizing)
        area = _signed_areas(nodes, tris)
        estimate = int(0.5 * np.sum(area / target) * 1.15) + nodes.shape[0]
        if estimate > params.node_budget:
            raise MeshBudgetError(
                f"sizing field needs about {estimate} nodes, over the budget of {params.node_budget}", estimate
            )
        if np.all(area <= target * (1 + 1e-9)):
            break
        cur["triangle_max_area"] = np.where(area > target, target, -1.0).reshape(-1, 1)
        cur = tr.triangulate(cur, f"rp{q}AaQ")
    else:
        raise MeshQualityError(f"sizing field not met after {params.max_passes} refinement passes")
    if cur["vertices"].shape[0] > params.node_budget:
        raise MeshBudgetError(f"mesh has {cur['vertices'].shape[0]} nodes, over budget", cur["vertices"].shape[0])
    return cur


def _build(nodes, tris, tags, sizes, meta) -> TriMesh:
    nodes = np.asarray(nodes, dtype=float)
    tris = np.asarray(tris, dtype=np.int64)
    area = _signed_areas(nodes, tris)
    flip = area < 0
    if flip.any():
        tris = tris.copy()
        tris[flip] = tris[flip][:, [0, 2, 1]]
        area = np.abs(area)
    if np.any(area <= 0):
        raise MeshQualityError("degenerate triangle produced")
    used = np.zeros(len(nodes), bool)
    used[tris.reshape(-1)] = True
    if not used.all():
        remap = np.cumsum(used) - 1
        nodes = nodes[used]
        tris = remap[tris]
    edges, normals = boundary_edges(tris, nodes)
    boundary_loops(edges)
    return TriMesh(nodes, tris, np.asarray(tags, dtype=np.int64), edges, normals, sizes, meta)


def mirror_half(nodes: np.ndarray, tris: np.ndarray, tags: np.ndarray, tag_map: dict[int, int] | None = None):
    """Reflect a mesh of {x >= 0} across x = 0, merging the nodes on the axis."""
    nodes = np.array(nodes, dtype=float)
    scale = max(1.0, float(np.abs(nodes).max()))
    nodes[np.abs(nodes[:, 0]) <= 1e-14 * scale, 0] = 0.0
    if np.any(nodes[:, 0] < 0):
        raise MeshError("half mesh has nodes with x < 0")
    off = nodes[:, 0] > 0
    idx = np.arange(len(nodes))
    image = idx.copy()
    image[off] = len(nodes) + np.arange(int(off.sum()))
    mirrored = nodes[off] * np.array([-1.0, 1.0])
    all_nodes = np.vstack([nodes, mirrored])
    rtris = image[tris][:, [0, 2, 1]]
    tag_map = tag_map or {REGION_RIGHT: REGION_LEFT, REGION_LEFT: REGION_RIGHT, REGION_NECK: REGION_NECK}
    rtags = np.array([tag_map.get(int(t), int(t)) for t in tags])
    # order: left-side triangles first so region blocks stay contiguous
    return all_nodes, np.vstack([tris, rtris]), np.concatenate([tags, rtags])


def neck_layers(mesh: TriMesh, x: float) -> int:
    """Number of element layers the vertical line through ``x`` crosses inside the neck."""
    sel = mesh.tags == REGION_NECK
    tris = mesh.triangles[sel]
    e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e = np.unique(np.sort(e, axis=1), axis=0)
    xa, xb = mesh.nodes[e[:, 0], 0], mesh.nodes[e[:, 1], 0]
    lo, hi = np.minimum(xa, xb), np.maximum(xa, xb)
    crossing = (lo < x) & (x < hi)
    ya, yb = mesh.nodes[e[:, 0], 1], mesh.nodes[e[:, 1], 1]
    t = (x - xa[crossing]) / (xb[crossing] - xa[crossing])
    ys = np.unique(np.round(ya[crossing] + t * (yb[crossing] - ya[crossing]), 15))
    # vertices sitting exactly on the line also cut the section
    on = mesh.nodes[np.unique(tris), :]
    ys = np.unique(np.concatenate([ys, on[np.abs(on[:, 0] - x) == 0, 1]]))
    return max(len(ys) - 1, 0)


def triangulate(geom: DumbbellGeometry, params: MeshParams | None = None) -> TriMesh:
    """Conforming graded triangulation of an assembled dumbbell."""
    params = params or MeshParams()
    mirror = params.mirror if params.mirror is not None else geom.spec.is_mirror_symmetric()
    n_across = params.n_across
    for safety in (1.5, 2.0, 2.7, 3.6):
        sizing, sizes = dumbbell_sizing(geom, params, safety)
        if mirror:
            cur = triangulate_domain(half_dumbbell_pslg(geom), sizing, params)
            tags = cur["triangle_attributes"].reshape(-1).astype(np.int64)
            nodes, tris, tags = mirror_half(cur["vertices"], cur["triangles"], tags)
        else:
            cur = triangulate_domain(dumbbell_pslg(geom), sizing, params)
            nodes, tris = cur["vertices"], cur["triangles"]
            tags = cur["triangle_attributes"].reshape(-1).astype(np.int64)
        meta = {
            "kind": "dumbbell",
            "eps": geom.eps,
            "delta": geom.delta,
            "M": geom.spec.M,
            "mirror": bool(mirror),
            "convex_bulks": bool(geom.spec.convex_bulks),
            "area_exact": geom.area,
            "neck_area_exact": geom.neck_area_exact(),
        }
        mesh = _build(nodes, tris, tags, dict(sizes), meta)
        sections = geom.eps * np.linspace(-0.95, 0.95, 9)
        layers = min(neck_layers(mesh, x) for x in sections)
        if layers >= n_across:
            mesh.meta["neck_layers_min"] = layers
            return mesh
    raise MeshQualityError(f"neck resolved by only {layers} layers after refinement retries (need {n_across})")


def triangulate_polygon(poly, h: float, params: MeshParams | None = None, tag: int = 0) -> TriMesh:
    """Uniform-size mesh of a single simple polygon (used in tests and limit problems)."""
    params = params or MeshParams(h_bulk=h)
    poly = np.asarray(poly, dtype=float)
    inside = _interior_point(poly)
    dom = PlanarDomain(poly, _polyline_segments(len(poly)), [(inside[0], inside[1], tag)])
    cur = triangulate_domain(dom, lambda p: np.full(np.atleast_2d(p).shape[0], h), params, h_max=h)
    tags = cur["triangle_attributes"].reshape(-1).astype(np.int64)
    return _build(cur["vertices"], cur["triangles"], tags, {"h_bulk": h}, {"kind": "polygon"})


def _interior_point(poly: np.ndarray) -> np.ndarray:
    t = tr.triangulate({"vertices": poly, "segments": _polyline_segments(len(poly))}, "pQ")
    P = t["vertices"][t["triangles"]]
    a = np.abs(_signed_areas(t["vertices"], t["triangles"]))
    return P[int(np.argmax(a))].mean(axis=0)


def mesh_from_arrays(nodes, tris, tags=None, sizes=None, meta=None) -> TriMesh:
    tris = np.asarray(tris)
    tags = np.zeros(len(tris), dtype=np.int64) if tags is None else tags
    return _build(nodes, tris, tags, sizes or {}, meta or {})


# --- quality -----------------------------------------------------------------


def triangle_angles(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    P = nodes[tris]
    out = np.empty((len(tris), 3))
    for a in range(3):
        u = P[:, (a + 1) % 3] - P[:, a]
        v = P[:, (a + 2) % 3] - P[:, a]
        cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        dot = np.einsum("ij,ij->i", u, v)
        out[:, a] = np.degrees(np.arctan2(cross, dot))
    return out


def mesh_quality(mesh: TriMesh, bins: int = 12) -> dict:
    ang = triangle_angles(mesh.nodes, mesh.triangles)
    P = mesh.nodes[mesh.triangles]
    edge = np.max(np.stack([np.hypot(*(P[:, (a + 1) % 3] - P[:, a]).T) for a in range(3)], axis=1), axis=1)
    hist = {}
    lo, hi = float(np.log10(edge.min())), float(np.log10(edge.max())) + 1e-12
    edges_log = np.linspace(lo, hi, bins + 1)
    for tag in np.unique(mesh.tags):
        sel = mesh.tags == tag
        counts, _ = np.histogram(np.log10(edge[sel]), bins=edges_log)
        hist[REGION_NAMES.get(int(tag), str(int(tag)))] = counts.tolist()
    return {
        "n_nodes": mesh.n_nodes,
        "n_triangles": mesh.n_triangles,
        "min_angle": float(ang.min()),
        "max_angle": float(ang.max()),
        "h_min": float(edge.min()),
        "h_max": float(edge.max()),
        "size_bins_log10": edges_log.tolist(),
        "size_histogram": hist,
        "area": mesh.area,
    }


# --- text format -------------------------------------------------------------
#
#   <node count>
#   x y            (one line per node, 17 significant digits)
#   i j k tag      (one line per triangle, 0-based node indices, counter-clockwise)


def save_text(mesh: TriMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for (i, j, k), t in zip(mesh.triangles, mesh.tags):
            fh.write(f"{i} {j} {k} {t}\n")


def load_text(path) -> TriMesh:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or len(lines[0]) != 1:
        raise MeshError(f"{path}: first line must hold the node count")
    n = int(lines[0][0])
    nodes = np.array([[float(a), float(b)] for a, b in lines[1 : 1 + n]])
    rest = lines[1 + n :]
    if any(len(r) != 4 for r in rest):
        raise MeshError(f"{path}: triangle lines must read 'i j k tag'")
    arr = np.array(rest, dtype=np.int64).reshape(-1, 4)
    return mesh_from_arrays(nodes, arr[:, :3], arr[:, 3], meta={"kind": "loaded"})
