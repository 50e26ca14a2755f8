"""Truncated versions of the unbounded harmonic limit problems.

Three domains are supported:

``normal``
    two half-planes {x < -1}, {x > 1} joined by the unit neck
    {|x| <= 1, -ell f2(x) < y < ell f1(x)}; data +-c ln r on the arcs r = R.
``thick``
    the plane minus the rays {x = 0, y >= y1} and {x = 0, y <= -y2}, cut at r = R.
``halfstrip``
    the half-plane {x > 0} plus the strip {x <= 0, |y| < a/2}, cut at r = R
    and x = -L.

Walls carry homogeneous Neumann conditions. All solutions are shifted so that
v(0, 0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
import triangle as tr

from .errors import FitError, GeometryError, PreconditionError
from .fem import DiscreteOperator, Field
from .geometry import NeckProfile
from .mesh import (
    AREA_FACTOR,
    MeshParams,
    PlanarDomain,
    TriMesh,
    _build,
    mirror_half,
    triangulate_domain,
)

KINDS = ("normal", "thick", "halfstrip")

# boundary markers
WALL, ARC_RIGHT, ARC_LEFT, END_FACE, AXIS = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class LimitDomain:
    kind: str
    R: float = 50.0
    L: float | None = None  # halfstrip only; default 50 * width
    ell: float = 1.0  # normal: neck height scale
    neck: NeckProfile | None = None  # normal / thick opening
    width: float = 1.0  # halfstrip strip width
    h_min: float = 0.02
    growth: float = 0.2
    n_arc: int = 256

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown limit domain {self.kind!r}; choose from {KINDS}")
        if self.R < 10:
            raise PreconditionError("truncation radius R must be at least 10")
        if self.kind == "halfstrip" and self.L is not None and self.L < 10 * self.width:
            raise PreconditionError("strip length L must be at least 10 widths")
        if self.width <= 0 or self.ell <= 0:
            raise PreconditionError("width and ell must be positive")

    @property
    def strip_length(self) -> float:
        return self.L if self.L is not None else 50.0 * self.width

    def profile(self) -> NeckProfile:
        return self.neck or NeckProfile.constant(0.5)


@dataclass
class LimitSolution:
    domain: LimitDomain
    mesh: TriMesh
    op: DiscreteOperator
    field: Field
    log_coef: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def v(self) -> np.ndarray:
        return self.field.values

    def probe(self, pts) -> np.ndarray:
        return self.op.probe(self.field, pts)


# --- geometry ---------------------------------------------------------------


def _arc(R, t0, t1, n):
    t = np.linspace(t0, t1, n)
    return np.column_stack([R * np.cos(t), R * np.sin(t)])


class _Builder:
    """Accumulates a marked boundary polyline for Triangle."""

    def __init__(self):
        self.pts: list[np.ndarray] = []
        self.marks: list[int] = []  # marker of the segment that starts at pts[i]

    def add(self, pts, mark):
        pts = np.atleast_2d(pts)
        for p in pts:
            if self.pts and np.allclose(p, self.pts[-1], atol=1e-13, rtol=0):
                self.marks[-1] = mark
                continue
            self.pts.append(np.asarray(p, dtype=float))
            self.marks.append(mark)

    def closed(self):
        if np.allclose(self.pts[0], self.pts[-1], atol=1e-13, rtol=0):
            self.pts.pop()
            self.marks.pop()
        v = np.array(self.pts)
        n = len(v)
        segs = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
        return v, segs, np.array(self.marks)


def _normal_half(dom: LimitDomain):
    """x >= 0 half of the normal limit domain (closed along the axis)."""
    nk = dom.profile()
    R, ell = dom.R, dom.ell
    if R <= 1.0 + ell * nk.sup_norm:
        raise GeometryError("truncation arc meets the neck; increase R")
    xs = nk.knots[nk.knots >= 0]
    top = np.column_stack([xs, ell * nk.f1(xs)])
    bot = np.column_stack([xs, -ell * nk.f2(xs)])
    y1, y2 = ell * float(nk.f1(1.0)), ell * float(nk.f2(1.0))
    th = np.arcsin(np.sqrt(R * R - 1.0) / R)
    b = _Builder()
    b.add(bot, WALL)  # (0,-f2(0)) -> (1,-f2(1))
    b.add([[1.0, -y2]], WALL)
    b.add(_arc(R, -th, th, dom.n_arc), ARC_RIGHT)
    b.add([[1.0, np.sqrt(R * R - 1.0)], [1.0, y1]], WALL)
    b.add(top[::-1], WALL)
    b.add([[0.0, ell * float(nk.f1(0.0))]], AXIS)  # closing segment along x = 0
    v, segs, marks = b.closed()
    v[np.isclose(v[:, 0], 1.0, atol=1e-13), 0] = 1.0
    corners = np.array([[1.0, y1], [1.0, -y2]])
    return v, segs, marks, [(0.5, 0.0, 1), (0.5 * (1 + R), 0.0, 2)], corners


def _thick_domain(dom: LimitDomain):
    nk = dom.profile()
    xs = np.linspace(-1, 1, 801)
    y1, y2 = float(np.min(nk.f1(xs))), float(np.min(nk.f2(xs)))
    R = dom.R
    if R <= 2 * max(y1, y2):
        raise GeometryError("truncation circle too close to the opening")
    n = dom.n_arc
    b = _Builder()
    b.add(_arc(R, -np.pi / 2, np.pi / 2, n), ARC_RIGHT)
    b.add(_arc(R, np.pi / 2, 3 * np.pi / 2, n), ARC_LEFT)
    v, segs, marks = b.closed()
    v[np.abs(v[:, 0]) < 1e-12 * R, 0] = 0.0
    top = int(np.argmin(np.abs(v - [0.0, R]).sum(axis=1)))
    bot = int(np.argmin(np.abs(v - [0.0, -R]).sum(axis=1)))
    extra = np.array([[0.0, y1], [0.0, -y2]])
    verts = np.vstack([v, extra])
    i1, i2 = len(v), len(v) + 1
    slit = np.array([[i1, top], [i2, bot]])
    return verts, np.vstack([segs, slit]), np.concatenate([marks, [WALL, WALL]]), (y1, y2)


def _halfstrip_domain(dom: LimitDomain):
    a, R, L = dom.width, dom.R, dom.strip_length
    if R <= a:
        raise GeometryError("truncation arc meets the strip")
    b = _Builder()
    b.add([[0.0, -a / 2], [0.0, -R]], WALL)
    b.add(_arc(R, -np.pi / 2, np.pi / 2, dom.n_arc), ARC_RIGHT)
    b.add([[0.0, R], [0.0, a / 2]], WALL)
    b.add([[-L, a / 2]], END_FACE)
    b.add([[-L, -a / 2]], WALL)
    v, segs, marks = b.closed()
    v[np.abs(v[:, 0]) < 1e-12 * R, 0] = 0.0
    return v, segs, marks


def _limit_sizing(dom: LimitDomain, centre_pts: np.ndarray, h_far: float):
    h0, g = dom.h_min, dom.growth

    def h(p):
        p = np.atleast_2d(p)
        d = np.min(np.hypot(p[:, None, 0] - centre_pts[None, :, 0], p[:, None, 1] - centre_pts[None, :, 1]), axis=1)
        return np.minimum(h0 + g * d, h_far)

    return h


def _mesh(vertices, segments, marks, seeds, sizing, h_far):
    dom = PlanarDomain(vertices, segments, seeds)
    data = dom.as_triangle_input()
    data["segment_markers"] = np.asarray(marks, dtype=np.int32).reshape(-1, 1)
    params = MeshParams(h_bulk=h_far, node_budget=400_000, max_passes=60)
    q = f"q{params.min_angle:g}"
    cur = tr.triangulate(data, f"p{q}Aa{AREA_FACTOR * h_far * h_far:.17g}Q")
    for _ in range(params.max_passes):
        P = cur["vertices"][cur["triangles"]]
        hh = np.minimum.reduce([sizing(P.mean(axis=1))] + [sizing(P[:, k]) for k in range(3)])
        target = AREA_FACTOR * hh * hh
        a = 0.5 * np.abs(
            (P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1]) - (P[:, 2, 0] - P[:, 0, 0]) * (P[:, 1, 1] - P[:, 0, 1])
        )
        if np.all(a <= target * (1 + 1e-9)):
            break
        cur["triangle_max_area"] = np.where(a > target, target, -1.0).reshape(-1, 1)
        cur = tr.triangulate(cur, f"rp{q}AaQ")
    return cur


def _segment_marks_to_nodes(cur) -> dict[int, np.ndarray]:
    segs = cur["segments"]
    marks = cur["segment_markers"].reshape(-1)
    out = {}
    for m in np.unique(marks):
        out[int(m)] = np.unique(segs[marks == m].reshape(-1))
    return out


def build_limit_mesh(dom: LimitDomain):
    """Mesh plus the Dirichlet bookkeeping: ``(mesh, node_sets, extras)``."""
    R = dom.R
    h_far = max(R / 40.0, dom.h_min)
    if dom.kind == "normal":
        v, segs, marks, seeds, corners = _normal_half(dom)
        nk = dom.profile()
        sizing = _limit_sizing(dom, corners, h_far)
        neck_h = dom.ell * float(np.min(nk.total(np.linspace(-1, 1, 201))))

        def sz(p, base=sizing):
            return np.minimum(base(p), np.where(np.abs(np.atleast_2d(p)[:, 0]) <= 1.0, neck_h / 8, np.inf))

        cur = _mesh(v, segs, marks, seeds, sz, h_far)
        sets = _segment_marks_to_nodes(cur)
        tags = cur["triangle_attributes"].reshape(-1).astype(np.int64)
        n_half = len(cur["vertices"])
        nodes, tris, tags = mirror_half(cur["vertices"], cur["triangles"], tags, {1: 1, 2: 0})
        # image indices of the half-mesh arc nodes
        off = cur["vertices"][:, 0] > 0
        image = np.arange(n_half)
        image[off] = n_half + np.arange(int(off.sum()))
        sets = {ARC_RIGHT: sets[ARC_RIGHT], ARC_LEFT: image[sets[ARC_RIGHT]]}
        mesh = _build(nodes, tris, tags, {"h_min": dom.h_min}, {"kind": "limit-normal", "mirror": True})
        return mesh, sets, {}
    if dom.kind == "thick":
        v, segs, marks, (y1, y2) = _thick_domain(dom)
        sizing = _limit_sizing(dom, np.array([[0.0, y1], [0.0, -y2]]), h_far)
        cur = _mesh(v, segs, marks, [(R / 2, 0.0, 0)], sizing, h_far)
        nodes, tris = cur["vertices"], cur["triangles"].astype(np.int64)
        sets = _segment_marks_to_nodes(cur)
        nodes, tris, sets = _cut_slits(nodes, tris, sets, y1, y2)
        tags = np.where(nodes[tris].mean(axis=1)[:, 0] > 0, 2, 0)
        mesh = _build(nodes, tris, tags, {"h_min": dom.h_min}, {"kind": "limit-thick", "y1": y1, "y2": y2})
        return mesh, sets, {"y1": y1, "y2": y2}
    v, segs, marks = _halfstrip_domain(dom)
    a = dom.width
    sizing = _limit_sizing(dom, np.array([[0.0, a / 2], [0.0, -a / 2]]), h_far)
    h_strip = a / 10.0

    def sz(p, base=sizing):
        p = np.atleast_2d(p)
        return np.where(p[:, 0] < 0, np.minimum(base(p), h_strip), base(p))

    cur = _mesh(v, segs, marks, [(R / 2, 0.0, 2)], sz, h_far)
    sets = _segment_marks_to_nodes(cur)
    tags = cur["triangle_attributes"].reshape(-1).astype(np.int64)
    mesh = _build(cur["vertices"], cur["triangles"], tags, {"h_min": dom.h_min}, {"kind": "limit-halfstrip"})
    return mesh, sets, {}


def _cut_slits(nodes, tris, sets, y1, y2):
    """Duplicate the nodes on both slits so the two faces are disconnected."""
    on = (nodes[:, 0] == 0.0) & ((nodes[:, 1] > y1) | (nodes[:, 1] < -y2))
    ids = np.nonzero(on)[0]
    dup = {int(i): len(nodes) + k for k, i in enumerate(ids)}
    nodes = np.vstack([nodes, nodes[ids]])
    left = nodes[tris].mean(axis=1)[:, 0] < 0
    tris = tris.copy()
    for t in np.nonzero(left)[0]:
        for a in range(3):
            j = int(tris[t, a])
            if j in dup:
                tris[t, a] = dup[j]
    arc_r = np.unique(np.concatenate([sets.get(ARC_RIGHT, []), sets.get(ARC_LEFT, [])])).astype(np.int64)
    x = nodes[arc_r, 0]
    right = list(arc_r[x > 0]) + [i for i in arc_r[x == 0]]
    leftn = list(arc_r[x < 0]) + [dup[int(i)] for i in arc_r[x == 0] if int(i) in dup]
    return nodes, tris, {ARC_RIGHT: np.array(right, dtype=np.int64), ARC_LEFT: np.array(leftn, dtype=np.int64)}


# --- solve ------------------------------------------------------------------


def solve_limit(dom: LimitDomain, log_coef: float) -> LimitSolution:
    """Harmonic solve with log Dirichlet data on the far arcs, shifted to v(0,0)=0."""
    mesh, sets, extra = build_limit_mesh(dom)
    op = DiscreteOperator(mesh)
    n = mesh.n_nodes
    r = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    fixed = np.zeros(n, bool)
    val = np.zeros(n)
    right = sets.get(ARC_RIGHT, np.array([], dtype=np.int64))
    left = sets.get(ARC_LEFT, np.array([], dtype=np.int64))
    fixed[right] = True
    val[right] = log_coef * np.log(r[right])
    if dom.kind in ("normal", "thick"):
        fixed[left] = True
        val[left] = -log_coef * np.log(r[left])
    if dom.kind == "halfstrip":
        end = sets[END_FACE]
        fixed[end] = True
        val[end] = -np.pi * log_coef * dom.strip_length / dom.width
    free = ~fixed
    v = val.copy()
    if log_coef != 0.0:
        K = op.K.tocsr()
        Kff = K[free][:, free].tocsc()
        rhs = -K[free][:, fixed] @ val[fixed]
        v[free] = spla.splu(Kff).solve(rhs)
    res = op.stiffness_apply(v)
    v0 = float(op.probe(v, np.array([0.0, 0.0])))
    v = v - v0
    diag = {
        "n_nodes": n,
        "n_dirichlet": int(fixed.sum()),
        "shift": v0,
        "harmonic_residual_dual": float(np.sqrt(np.sum(res[free] ** 2 / op.mass[free]))),
        "harmonic_residual_max": float(np.max(np.abs(res[free]))) if free.any() else 0.0,
        "neumann_flux_residual": _neumann_flux_residual(mesh, res, free),
        **extra,
    }
    return LimitSolution(dom, mesh, op, op.field(v), log_coef, diag)


def _neumann_flux_residual(mesh: TriMesh, res: np.ndarray, free: np.ndarray) -> dict:
    """Net discrete flux leaking through each straight wall piece (should be ~0)."""
    edges = mesh.boundary_edges
    normals = np.round(mesh.boundary_normals, 12)
    out = {}
    keys = {}
    for e, nrm in zip(edges, normals):
        if not (free[e[0]] and free[e[1]]):
            continue
        a, b = mesh.nodes[e[0]], mesh.nodes[e[1]]
        if abs(nrm[1]) < 1e-9:
            key = f"x={round(a[0], 9):g}"
        elif abs(nrm[0]) < 1e-9:
            key = f"y={round(a[1], 9):g}"
        else:
            key = "curved"
        keys.setdefault(key, set()).update(e.tolist())
    for key, ids in keys.items():
        out[key] = float(np.sum(res[list(ids)]))
    return out


# --- post-processing --------------------------------------------------------


def _sample_ok(n, need, what):
    if n < need:
        raise FitError(f"only {n} samples for {what}; need at least {need}")


def log_slope_fit(sol: LimitSolution, sector: tuple[float, float], r_range: tuple[float, float], n_r: int = 40, n_t: int = 25) -> float:
    """Least-squares b in v ~ a + b ln r over an annular sector (angles in radians)."""
    r0, r1 = r_range
    if r1 > 0.8 * sol.domain.R + 1e-12:
        raise PreconditionError("r_range must stay 20% inside the truncation radius")
    rs = np.geomspace(r0, r1, n_r)
    ts = np.linspace(sector[0], sector[1], n_t + 2)[1:-1]
    RR, TT = np.meshgrid(rs, ts)
    pts = np.column_stack([(RR * np.cos(TT)).ravel(), (RR * np.sin(TT)).ravel()])
    keep = _inside(sol, pts)
    pts = pts[keep]
    _sample_ok(len(pts), 3, "log slope fit")
    v = sol.probe(pts)
    r = np.hypot(pts[:, 0], pts[:, 1])
    A = np.column_stack([np.ones_like(r), np.log(r)])
    return float(np.linalg.lstsq(A, v, rcond=None)[0][1])


def linear_slope_fit(sol: LimitSolution, x_range: tuple[float, float], n_x: int = 60, n_y: int = 9) -> float:
    """Least-squares s in v ~ a + s x inside the strip."""
    a = sol.domain.width
    xs = np.linspace(x_range[0], x_range[1], n_x)
    ys = np.linspace(-a / 2, a / 2, n_y + 2)[1:-1]
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    if sol.domain.kind == "halfstrip" and np.min(pts[:, 0]) < -0.8 * sol.domain.strip_length - 1e-12:
        raise PreconditionError("x_range must stay 20% away from the strip end")
    pts = pts[_inside(sol, pts)]
    _sample_ok(len(pts), 3, "linear slope fit")
    v = sol.probe(pts)
    A = np.column_stack([np.ones(len(pts)), pts[:, 0]])
    return float(np.linalg.lstsq(A, v, rcond=None)[0][1])


def _inside(sol, pts):
    return sol.mesh.contains(pts)


def flux_through_section(sol: LimitSolution, x: float) -> float:
    """int dv/dx dy along the vertical line at ``x``, exact for the P1 gradient."""
    mesh = sol.mesh
    P = mesh.nodes[mesh.triangles]
    g = sol.op.triangle_gradients(sol.field)
    total = 0.0
    xmin, xmax = P[:, :, 0].min(axis=1), P[:, :, 0].max(axis=1)
    for t in np.nonzero((xmin < x) & (xmax > x))[0]:
        ys = []
        for a in range(3):
            p, q = P[t, a], P[t, (a + 1) % 3]
            if (p[0] - x) * (q[0] - x) < 0:
                s = (x - p[0]) / (q[0] - p[0])
                ys.append(p[1] + s * (q[1] - p[1]))
            elif p[0] == x:
                ys.append(p[1])
        if len(ys) >= 2:
            total += (max(ys) - min(ys)) * g[t, 0]
    return float(total)


def flux_through_arc(sol: LimitSolution, radius: float, t0: float = -np.pi / 2, t1: float = np.pi / 2, n: int = 4000) -> float:
    """int dv/dr r dtheta over an arc, midpoint rule on the P1 gradient."""
    ts = t0 + (np.arange(n) + 0.5) * (t1 - t0) / n
    pts = np.column_stack([radius * np.cos(ts), radius * np.sin(ts)])
    tri, _ = sol.mesh.locate(pts)
    g = sol.op.triangle_gradients(sol.field)[tri]
    dvdr = g[:, 0] * np.cos(ts) + g[:, 1] * np.sin(ts)
    return float(np.sum(dvdr) * radius * (t1 - t0) / n)


def oddness_defect(sol: LimitSolution, n: int = 4000, seed: int = 0) -> float:
    """sup |v(x,y) + v(-x,y)| / sup |v| over random interior samples."""
    mesh = sol.mesh
    rng = np.random.default_rng(seed)
    t = rng.integers(0, mesh.n_triangles, n)
    w = rng.dirichlet(np.ones(3), n)
    pts = np.einsum("qa,qad->qd", w, mesh.nodes[mesh.triangles[t]])
    mirror = pts * np.array([-1.0, 1.0])
    keep = _inside(sol, mirror)
    a = sol.probe(pts[keep])
    b = sol.probe(mirror[keep])
    scale = float(np.max(np.abs(sol.v))) or 1.0
    return float(np.max(np.abs(a + b)) / scale)


def slope_identity(sol: LimitSolution) -> dict:
    """Compare the strip slope with pi * (fitted log coefficient) / width."""
    if sol.domain.kind != "halfstrip":
        raise PreconditionError("slope identity applies to the halfstrip domain")
    R, L, a = sol.domain.R, sol.domain.strip_length, sol.domain.width
    b = log_slope_fit(sol, (-np.pi / 2, np.pi / 2), (max(4.0 * a, 0.1 * R), 0.8 * R))
    s = linear_slope_fit(sol, (-0.8 * L, -0.2 * L))
    xs = np.linspace(-0.8 * L, -0.2 * L, 5)
    fluxes = [flux_through_section(sol, x) for x in xs]
    arc = flux_through_arc(sol, 0.5 * R)
    return {
        "log_coef_fit": b,
        "slope_fit": s,
        "ratio": s * a / (np.pi * b) if b != 0 else float("nan"),
        "section_fluxes": fluxes,
        "flux_spread": float((max(fluxes) - min(fluxes)) / max(abs(np.mean(fluxes)), 1e-300)),
        "arc_flux": arc,
        "arc_vs_section": float(abs(arc - np.mean(fluxes)) / max(abs(np.mean(fluxes)), 1e-300)),
        "pi_log_coef": np.pi * b,
    }
