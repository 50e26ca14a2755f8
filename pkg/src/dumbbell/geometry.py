"""Dumbbell domains: two flat-mouthed bulks joined by a thin neck.

The neck is ``{|x| <= eps, -delta*f2(x/eps) < y < delta*f1(x/eps)}`` and the
bulks are copies of two reference polygons translated by ``-eps`` (left) and
``+eps`` (right) along the x axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GeometryError, PreconditionError

DEFAULT_KNOTS = 65


def _as_profile_values(f, knots):
    if callable(f):
        vals = np.asarray(f(knots), dtype=float)
        if vals.shape == ():
            vals = np.full_like(knots, float(vals))
        return vals
    vals = np.asarray(f, dtype=float)
    if vals.shape == ():
        return np.full_like(knots, float(vals))
    if vals.shape != knots.shape:
        raise PreconditionError(f"profile values must have {knots.size} entries, got {vals.size}")
    return vals


class NeckProfile:
    """Pair of C^1 piecewise-cubic height functions on [-1, 1].

    ``f1`` bounds the rescaled neck from above and ``f2`` from below.  Both are
    not-a-knot cubic splines through values on a uniform knot grid, which
    reproduces constant and quadratic profiles exactly.
    """

    def __init__(self, f1, f2, n_knots: int = DEFAULT_KNOTS, eta0: float | None = None):
        if n_knots < 4:
            raise PreconditionError("need at least 4 knots")
        self.knots = np.linspace(-1.0, 1.0, n_knots)
        self.f1_values = _as_profile_values(f1, self.knots)
        self.f2_values = _as_profile_values(f2, self.knots)
        self._f1 = CubicSpline(self.knots, self.f1_values)
        self._f2 = CubicSpline(self.knots, self.f2_values)
        self.eta0 = eta0
        self._validate()

    @classmethod
    def constant(cls, h1: float, h2: float | None = None, **kw) -> NeckProfile:
        """Flat neck of upper height ``h1`` and lower height ``h2`` (default ``h1``)."""
        h2 = h1 if h2 is None else h2
        kw.setdefault("eta0", 0.5)
        return cls(h1, h2, **kw)

    def f1(self, x, nu: int = 0):
        return self._f1(x, nu)

    def f2(self, x, nu: int = 0):
        return self._f2(x, nu)

    def total(self, x):
        """Rescaled neck section height f1 + f2."""
        return self._f1(x) + self._f2(x)

    @property
    def flat_ends(self) -> bool:
        return self.eta0 is not None

    @property
    def sup_norm(self) -> float:
        """max(||f1||_inf, ||f2||_inf) over a dense sample."""
        xs = np.linspace(-1.0, 1.0, 8 * self.knots.size + 1)
        return float(max(np.abs(self._f1(xs)).max(), np.abs(self._f2(xs)).max()))

    def is_even(self, tol: float = 1e-13) -> bool:
        return bool(
            np.allclose(self.f1_values, self.f1_values[::-1], rtol=0, atol=tol)
            and np.allclose(self.f2_values, self.f2_values[::-1], rtol=0, atol=tol)
        )

    def _validate(self):
        xs = np.linspace(-1.0, 1.0, 8 * self.knots.size + 1)
        if self._f1(xs).min() <= 0 or self._f2(xs).min() <= 0:
            raise PreconditionError("neck profiles must be strictly positive on [-1, 1]")
        if self.eta0 is not None:
            if not 0 < self.eta0 < 1:
                raise PreconditionError("eta0 must lie in (0, 1)")
            scale = max(1.0, self.sup_norm)
            ends = np.concatenate(
                [np.linspace(-1.0, -1.0 + self.eta0, 64), np.linspace(1.0 - self.eta0, 1.0, 64)]
            )
            worst = max(np.abs(self._f1(ends, 1)).max(), np.abs(self._f2(ends, 1)).max())
            if worst > 1e-10 * scale:
                raise PreconditionError(
                    f"flat_ends declared but |f'| reaches {worst:.3e} on the end intervals"
                )

    def __repr__(self):
        return f"NeckProfile(n_knots={self.knots.size}, eta0={self.eta0})"


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise polygons)."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_intersections(pts: np.ndarray, closed: bool = True):
    """Index pairs of non-adjacent polyline edges that touch or cross."""
    n = len(pts)
    a = pts
    b = np.roll(pts, -1, axis=0) if closed else pts[1:]
    if not closed:
        a = pts[:-1]
    m = len(a)
    bad = []
    # bounding boxes first, exact orientation tests on candidates
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    for i in range(m):
        cand = np.nonzero(
            (lo[:, 0] <= hi[i, 0]) & (hi[:, 0] >= lo[i, 0]) & (lo[:, 1] <= hi[i, 1]) & (hi[:, 1] >= lo[i, 1])
        )[0]
        for j in cand:
            if j <= i:
                continue
            if j == i + 1 or (closed and i == 0 and j == m - 1):
                continue
            if _seg_touch(a[i], b[i], a[j], b[j]):
                bad.append((i, j))
    return bad


def _orient(p, q, r):
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _seg_touch(p1, p2, q1, q2) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True

    def on(p, q, r):
        return min(p[0], q[0]) <= r[0] <= max(p[0], q[0]) and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])

    return (
        (d1 == 0 and on(q1, q2, p1))
        or (d2 == 0 and on(q1, q2, p2))
        or (d3 == 0 and on(p1, p2, q1))
        or (d4 == 0 and on(p1, p2, q2))
    )


def is_convex(poly: np.ndarray) -> bool:
    nxt = np.roll(poly, -1, axis=0)
    nn = np.roll(poly, -2, axis=0)
    cross = (nxt[:, 0] - poly[:, 0]) * (nn[:, 1] - nxt[:, 1]) - (nxt[:, 1] - poly[:, 1]) * (nn[:, 0] - nxt[:, 0])
    return bool(np.all(cross >= -1e-14) or np.all(cross <= 1e-14))


@dataclass(frozen=True)
class BulkDomain:
    """Reference bulk polygon touching the origin through a flat vertical mouth.

    ``polygon`` is counter-clockwise; the part of its boundary within ``2*r0``
    of the origin must be a piece of the line x = 0.
    """

    polygon: np.ndarray
    side: str
    r0: float

    def __post_init__(self):
        poly = np.asarray(self.polygon, dtype=float)
        object.__setattr__(self, "polygon", poly)
        if self.side not in ("left", "right"):
            raise PreconditionError("side must be 'left' or 'right'")
        if self.r0 <= 0:
            raise PreconditionError("r0 must be positive")
        self._validate()

    @classmethod
    def rectangle(cls, width: float, height: float, side: str, r0: float | None = None) -> BulkDomain:
        """Axis-aligned rectangle whose mouth is centred on the origin."""
        h = height / 2.0
        if side == "right":
            poly = [(0.0, -h), (width, -h), (width, h), (0.0, h)]
        else:
            poly = [(0.0, h), (-width, h), (-width, -h), (0.0, -h)]
        if r0 is None:
            r0 = 0.5 * min(h, width)
        return cls(np.array(poly), side, r0)

    def mirrored(self) -> BulkDomain:
        poly = self.polygon[::-1] * np.array([-1.0, 1.0])
        return BulkDomain(poly, "left" if self.side == "right" else "right", self.r0)

    @property
    def area(self) -> float:
        return polygon_area(self.polygon)

    def _validate(self):
        poly = self.polygon
        if len(poly) < 3:
            raise GeometryError("polygon needs at least three vertices")
        if polygon_area(poly) <= 0:
            raise GeometryError(f"{self.side} bulk polygon must be positively oriented")
        bad = _segments_intersections(poly)
        if bad:
            raise GeometryError(f"{self.side} bulk polygon self-intersects at edges {bad[0]}")
        sgn = 1.0 if self.side == "right" else -1.0
        if np.any(sgn * poly[:, 0] < -1e-14):
            raise GeometryError(f"{self.side} bulk must lie in the {'right' if sgn > 0 else 'left'} half-plane")
        # (O1)+(O3): the x = 0 edges must cover [-2 r0, 2 r0] and every other edge
        # must stay at distance >= 2 r0 from the origin.
        nxt = np.roll(poly, -1, axis=0)
        flat = (np.abs(poly[:, 0]) < 1e-14) & (np.abs(nxt[:, 0]) < 1e-14)
        covered = []
        for i in np.nonzero(flat)[0]:
            covered.append((min(poly[i, 1], nxt[i, 1]), max(poly[i, 1], nxt[i, 1])))
        covered.sort()
        lo, hi = -2 * self.r0, 2 * self.r0
        reach = lo
        for a, b in covered:
            if a <= reach + 1e-14 and b > reach:
                reach = b
        if not covered or reach < hi - 1e-14 or min(a for a, _ in covered) > lo + 1e-14:
            raise GeometryError(
                f"{self.side} bulk: boundary near the origin is not the vertical segment "
                f"x=0, |y|<=2*r0 (r0={self.r0})"
            )
        for i in np.nonzero(~flat)[0]:
            if _point_segment_distance(np.zeros(2), poly[i], nxt[i]) < 2 * self.r0 - 1e-12:
                raise GeometryError(
                    f"{self.side} bulk: edge {i} comes within 2*r0 of the origin"
                )


def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-300), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


@dataclass(frozen=True)
class DumbbellSpec:
    left: BulkDomain
    right: BulkDomain
    neck: NeckProfile
    convex_bulks: bool = False

    def __post_init__(self):
        if self.left.side != "left" or self.right.side != "right":
            raise PreconditionError("left/right bulk sides are swapped")
        if self.convex_bulks and not (is_convex(self.left.polygon) and is_convex(self.right.polygon)):
            raise GeometryError("convex_bulks declared but a bulk polygon is not convex")

    @property
    def M(self) -> float:
        """max(||f1||_inf, ||f2||_inf) + 1, the ball-radius factor at the neck mouths."""
        return self.neck.sup_norm + 1.0

    @property
    def r0(self) -> float:
        return min(self.left.r0, self.right.r0)

    @property
    def bulk_areas(self) -> tuple[float, float]:
        return self.left.area, self.right.area

    def is_mirror_symmetric(self, tol: float = 1e-13) -> bool:
        if not self.neck.is_even(tol):
            return False
        mirrored = self.right.mirrored().polygon
        lp = self.left.polygon
        if len(lp) != len(mirrored):
            return False
        for shift in range(len(lp)):
            if np.allclose(np.roll(lp, shift, axis=0), mirrored, atol=tol, rtol=0):
                return True
        return False

    def max_delta(self) -> float:
        """Supremum of admissible delta: delta*(max f_i + 1) < r0."""
        return self.r0 / self.M

    @classmethod
    def symmetric_rectangles(
        cls, width: float = 2.0, height: float = 2.0, neck: NeckProfile | None = None, r0: float | None = None
    ) -> DumbbellSpec:
        right = BulkDomain.rectangle(width, height, "right", r0)
        left = BulkDomain.rectangle(width, height, "left", right.r0)
        return cls(left, right, neck or NeckProfile.constant(0.5), convex_bulks=True)


REGION_LEFT, REGION_NECK, REGION_RIGHT = 0, 1, 2
REGION_NAMES = {REGION_LEFT: "left", REGION_NECK: "neck", REGION_RIGHT: "right"}
REGION_IDS = {v: k for k, v in REGION_NAMES.items()}


@dataclass
class DumbbellGeometry:
    """Boundary polyline of the assembled domain plus its region structure."""

    eps: float
    delta: float
    boundary: np.ndarray
    regions: dict[str, np.ndarray]
    interfaces: dict[str, np.ndarray]
    seeds: dict[str, tuple[float, float]]
    spec: DumbbellSpec = field(repr=False)

    @property
    def area(self) -> float:
        return polygon_area(self.boundary)

    def region_area(self, name: str) -> float:
        return polygon_area(self.regions[name])

    def neck_area_exact(self) -> float:
        """eps*delta*integral(f1+f2), integrated piecewise on the spline knots."""
        from scipy.integrate import quad

        k = self.spec.neck.knots
        total = 0.0
        for a, b in zip(k[:-1], k[1:]):
            total += quad(self.spec.neck.total, a, b, epsabs=1e-14, epsrel=1e-14)[0]
        return self.eps * self.delta * total

    def save_csv(self, path):
        np.savetxt(path, self.boundary, delimiter=",", header="x,y", comments="", fmt="%.17g")


def _insert_on_mouth(poly: np.ndarray, y: float) -> tuple[np.ndarray, int]:
    """Insert (0, y) into the vertical x = 0 edge that contains it."""
    for i, p in enumerate(poly):
        if abs(p[0]) < 1e-14 and abs(p[1] - y) < 1e-15:
            return poly, i
    nxt = np.roll(poly, -1, axis=0)
    for i in range(len(poly)):
        a, b = poly[i], nxt[i]
        if abs(a[0]) < 1e-14 and abs(b[0]) < 1e-14 and min(a[1], b[1]) < y < max(a[1], b[1]):
            return np.insert(poly, i + 1, [0.0, y], axis=0), i + 1
    raise GeometryError(f"mouth point (0, {y}) is not on the flat boundary segment")


def _open_mouth(poly: np.ndarray, y_top: float, y_bot: float):
    """Insert both opening points; return polygon and the boundary path avoiding the opening."""
    poly, _ = _insert_on_mouth(poly, y_top)
    poly, _ = _insert_on_mouth(poly, y_bot)
    it = int(np.nonzero((np.abs(poly[:, 0]) < 1e-14) & (np.abs(poly[:, 1] - y_top) < 1e-15))[0][0])
    ib = int(np.nonzero((np.abs(poly[:, 0]) < 1e-14) & (np.abs(poly[:, 1] - y_bot) < 1e-15))[0][0])
    n = len(poly)
    if (it + 1) % n == ib:
        first, second = it, ib
    elif (ib + 1) % n == it:
        first, second = ib, it
    else:
        raise GeometryError("opening points are not adjacent on the mouth segment")
    idx = [(second + k) % n for k in range(n)]
    idx = idx[: idx.index(first) + 1]
    return poly, poly[idx]


def _dedupe(points: list[np.ndarray]) -> np.ndarray:
    out = [points[0]]
    for p in points[1:]:
        if np.hypot(*(p - out[-1])) > 0:
            out.append(p)
    if np.hypot(*(out[-1] - out[0])) == 0:
        out.pop()
    return np.array(out)


def assemble_dumbbell(spec: DumbbellSpec, eps: float, delta: float) -> DumbbellGeometry:
    """Trace the boundary of the eps-domain and label its three regions."""
    if eps <= 0 or delta <= 0:
        raise PreconditionError("eps and delta must be positive")
    if delta * spec.M >= spec.r0:
        raise PreconditionError(
            f"delta={delta:g} too large: delta*(max f + 1)={delta * spec.M:g} must stay below r0={spec.r0:g}"
        )
    neck = spec.neck
    t = neck.knots
    top = np.column_stack([eps * t, delta * neck.f1(t)])
    bot = np.column_stack([eps * t, -delta * neck.f2(t)])
    shift = np.array([eps, 0.0])

    lpoly, lpath = _open_mouth(spec.left.polygon, delta * neck.f1(-1.0), -delta * neck.f2(-1.0))
    rpoly, rpath = _open_mouth(spec.right.polygon, delta * neck.f1(1.0), -delta * neck.f2(1.0))
    lpoly, lpath = lpoly - shift, lpath - shift
    rpoly, rpath = rpoly + shift, rpath + shift

    pieces = list(top[::-1]) + list(lpath) + list(bot) + list(rpath)
    boundary = _dedupe([np.asarray(p, dtype=float) for p in pieces])
    bad = _segments_intersections(boundary)
    if bad:
        i, j = bad[0]
        raise GeometryError(
            f"boundary is not simple: segment {i} {boundary[i].tolist()}->{boundary[(i + 1) % len(boundary)].tolist()} "
            f"meets segment {j} {boundary[j].tolist()}->{boundary[(j + 1) % len(boundary)].tolist()}"
        )
    if polygon_area(boundary) <= 0:
        raise GeometryError("assembled boundary is not positively oriented")

    neck_poly = np.vstack([bot, top[::-1]])
    interfaces = {
        "left": np.array([[-eps, -delta * neck.f2(-1.0)], [-eps, delta * neck.f1(-1.0)]]),
        "right": np.array([[eps, -delta * neck.f2(1.0)], [eps, delta * neck.f1(1.0)]]),
    }
    r0 = spec.r0
    seeds = {
        "left": (-eps - 0.5 * r0, 0.0),
        "neck": (0.0, 0.5 * delta * (neck.f1(0.0) - neck.f2(0.0))),
        "right": (eps + 0.5 * r0, 0.0),
    }
    return DumbbellGeometry(
        eps=eps,
        delta=delta,
        boundary=boundary,
        regions={"left": lpoly, "neck": neck_poly, "right": rpoly},
        interfaces=interfaces,
        seeds=seeds,
        spec=spec,
    )


# --- scaling families and regimes -------------------------------------------------

THICK = "thick"
NORMAL = "normal"
CRITICAL = "critical_thin"
SUBCRITICAL = "subcritical_thin"
SUPERCRITICAL = "supercritical_thin"


@dataclass(frozen=True)
class Regime:
    tag: str
    ell: float | None = None

    def __post_init__(self):
        has_ell = self.tag in (NORMAL, CRITICAL)
        if has_ell and not (self.ell is not None and 0 < self.ell < math.inf):
            raise PreconditionError(f"regime {self.tag} needs a finite positive ell")
        if not has_ell and self.ell is not None:
            raise PreconditionError(f"regime {self.tag} takes no ell")

    @property
    def scale_variable(self) -> str:
        """Which log enters the energy rescaling: 'eps', 'delta', or 'ratio' (eps/delta)."""
        return {NORMAL: "eps", SUBCRITICAL: "ratio"}.get(self.tag, "delta")


@dataclass(frozen=True)
class ScalingFamily:
    """delta(eps) = c*eps**p ('power') or c*eps*|ln eps|**(-q) ('logpower')."""

    kind: str
    c: float
    exponent: float

    def __post_init__(self):
        if self.kind not in ("power", "logpower"):
            raise PreconditionError(f"unsupported scaling family {self.kind!r}")
        if self.c <= 0:
            raise PreconditionError("scaling coefficient must be positive")

    def delta(self, eps):
        eps = np.asarray(eps, dtype=float)
        if np.any(eps <= 0) or (self.kind == "logpower" and np.any(eps >= 1)):
            raise PreconditionError("eps outside the family's validity range")
        if self.kind == "power":
            out = self.c * eps**self.exponent
        else:
            out = self.c * eps * np.abs(np.log(eps)) ** (-self.exponent)
        return float(out) if out.ndim == 0 else out


def classify_regime(family: ScalingFamily) -> Regime:
    """Limit of delta/eps and delta|ln delta|/eps as eps -> 0 for the family."""
    p = family.exponent
    if family.kind == "power":
        if p <= 0:
            raise PreconditionError("power family with p <= 0 does not have delta -> 0")
        if p < 1:
            return Regime(THICK)
        if p == 1:
            return Regime(NORMAL, family.c)
        return Regime(SUBCRITICAL)
    # delta/eps = c |ln eps|^-q, delta|ln delta|/eps ~ c |ln eps|^(1-q)
    if p < 0:
        return Regime(THICK)
    if p == 0:
        return Regime(NORMAL, family.c)
    if p < 1:
        return Regime(SUPERCRITICAL)
    if p == 1:
        return Regime(CRITICAL, family.c)
    return Regime(SUBCRITICAL)
