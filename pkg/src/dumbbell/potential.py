"""Multi-well potentials W, their wells, and the C^2 truncation used by the flow."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import PotentialError, PreconditionError

Scalar = Callable[[np.ndarray], np.ndarray]


class DegenerateWellError(PotentialError):
    """A critical point of W has vanishing second derivative."""


@dataclass(frozen=True)
class Potential:
    """W with its first two derivatives and the coercivity bound Mbar.

    ``mbar`` may be None for potentials without a coercivity bound (sin^2);
    such potentials cannot be truncated.
    """

    name: str
    w: Scalar
    dw: Scalar
    ddw: Scalar
    mbar: float | None = None
    params: dict = field(default_factory=dict)
    ddw_bound: float | None = None

    def __call__(self, t):
        return self.w(t)

    def check_derivatives(self, probes: np.ndarray | None = None, rtol: float = 1e-6) -> float:
        """Worst relative mismatch between (dw, ddw) and central differences of (w, dw)."""
        if probes is None:
            span = 2.0 * (self.mbar or 2.0)
            probes = np.linspace(-span, span, 41)
        h = 1e-5 * np.maximum(1.0, np.abs(probes))
        worst = 0.0
        for f, df in ((self.w, self.dw), (self.dw, self.ddw)):
            fd = (f(probes + h) - f(probes - h)) / (2 * h)
            exact = df(probes)
            scale = np.maximum(1.0, np.abs(exact))
            worst = max(worst, float(np.max(np.abs(fd - exact) / scale)))
        return worst

    def check_coercive(self) -> bool:
        """(W3) sign test at +-Mbar and +-2 Mbar."""
        if self.mbar is None:
            return False
        t = np.array([self.mbar, 2 * self.mbar])
        return bool(np.all(self.dw(t) > 0) and np.all(self.dw(-t) < 0))


def polynomial(coeffs: Sequence[float], name: str = "poly", mbar: float | None = None, **params) -> Potential:
    """Potential from ascending polynomial coefficients."""
    p = Polynomial(np.asarray(coeffs, dtype=float))
    dp, ddp = p.deriv(1), p.deriv(2)
    pot = Potential(name, p, dp, ddp, mbar, dict(params, coeffs=list(map(float, coeffs))))
    if mbar is None:
        return _with_default_mbar(pot)
    return pot


def quartic(alpha: float = -1.0, beta: float = 1.0, mbar: float | None = None) -> Potential:
    """(u - alpha)^2 (u - beta)^2."""
    p = Polynomial.fromroots([alpha, alpha, beta, beta])
    return polynomial(p.coef, name="quartic", mbar=mbar, alpha=alpha, beta=beta)


def triple(mbar: float | None = None) -> Potential:
    """u^2 (u^2 - 1)^2 with wells {-1, 0, 1}."""
    p = Polynomial.fromroots([-1, -1, 0, 0, 1, 1])
    return polynomial(p.coef, name="triple", mbar=mbar)


def sin2() -> Potential:
    """sin^2(u); periodic, so no coercivity bound."""
    return Potential(
        "sin2",
        lambda t: np.sin(t) ** 2,
        lambda t: np.sin(2 * np.asarray(t)),
        lambda t: 2 * np.cos(2 * np.asarray(t)),
        None,
    )


BUILTIN = {"quartic": quartic, "triple": triple, "sin2": sin2}


def from_config(cfg: dict) -> Potential:
    """Build a potential from a config table: ``{name=..., <params>}``."""
    cfg = dict(cfg)
    name = cfg.pop("name")
    if name == "polynomial":
        return polynomial(cfg.pop("coeffs"), mbar=cfg.pop("mbar", None))
    if name not in BUILTIN:
        raise PreconditionError(f"unknown potential {name!r}; known: {sorted(BUILTIN) + ['polynomial']}")
    return BUILTIN[name](**cfg)


def _sign_change_roots(dw: Scalar, lo: float, hi: float, n: int) -> np.ndarray:
    t = np.linspace(lo, hi, n + 1)
    v = dw(t)
    exact = t[v == 0]
    idx = np.nonzero(v[:-1] * v[1:] < 0)[0]
    return np.sort(np.concatenate([exact, 0.5 * (t[idx] + t[idx + 1])]))


def _with_default_mbar(p: Potential) -> Potential:
    """Scan W' outward for the last sign change and place Mbar beyond it."""
    for span in (4.0, 16.0, 64.0, 256.0):
        roots = _sign_change_roots(p.dw, -span, span, 4096)
        if roots.size == 0:
            continue
        reach = float(np.max(np.abs(roots)))
        if reach > 0.5 * span:
            continue
        outer = np.linspace(reach + 1e-9, span, 512)
        if np.all(p.dw(outer[1:]) > 0) and np.all(p.dw(-outer[1:]) < 0):
            mbar = 1.1 * reach + 0.1
            return Potential(p.name, p.w, p.dw, p.ddw, mbar, p.params)
    return p


@dataclass(frozen=True)
class WellSet:
    wells: tuple[float, ...]
    curvatures: tuple[float, ...]

    def __len__(self):
        return len(self.wells)

    def __iter__(self):
        return iter(self.wells)

    def __contains__(self, t) -> bool:
        return any(abs(t - w) <= 1e-8 * max(1.0, abs(w)) for w in self.wells)

    def curvature(self, t: float) -> float:
        for w, c in zip(self.wells, self.curvatures):
            if abs(t - w) <= 1e-8 * max(1.0, abs(w)):
                return c
        raise KeyError(t)


def _refine_root(dw: Scalar, ddw: Scalar, a: float, b: float, tol: float = 1e-12) -> float:
    fa, fb = float(dw(a)), float(dw(b))
    if fa == 0:
        return a
    if fb == 0:
        return b
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = float(dw(m))
        if fm == 0 or b - a < 1e-10:
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b, fb = m, fm
    t = 0.5 * (a + b)
    for _ in range(50):
        f, df = float(dw(t)), float(ddw(t))
        if abs(f) <= tol or df == 0:
            break
        t -= f / df
    return t


def find_wells(p: Potential, bracket: tuple[float, float], grid_n: int = 512, resolution: float = 1e-6) -> WellSet:
    """All roots of W' in ``bracket`` with W'' > 0, refined to |W'| <= 1e-12."""
    lo, hi = bracket
    if grid_n < 64:
        raise PreconditionError("grid_n must be at least 64")
    if p.mbar is not None and (lo > -p.mbar or hi < p.mbar):
        raise PreconditionError(f"bracket {bracket} must contain [-Mbar, Mbar] = [{-p.mbar}, {p.mbar}]")
    t = np.linspace(lo, hi, grid_n + 1)
    v = p.dw(t)
    roots = []
    for i in range(grid_n):
        if v[i] == 0:
            roots.append(float(t[i]))
        elif v[i] * v[i + 1] < 0:
            roots.append(_refine_root(p.dw, p.ddw, float(t[i]), float(t[i + 1])))
    if v[-1] == 0:
        roots.append(float(t[-1]))
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if not merged or r - merged[-1] > resolution:
            merged.append(r)
    wells, curv = [], []
    for r in merged:
        c = float(p.ddw(r))
        scale = max(1.0, float(np.max(np.abs(p.ddw(t)))))
        if abs(c) <= 1e-8 * scale:
            raise DegenerateWellError(f"critical point {r:.12g} of {p.name} has W''={c:.3e}")
        if c > 0:
            if abs(float(p.dw(r))) > 1e-12:
                raise PotentialError(f"well {r} not refined: |W'|={abs(float(p.dw(r))):.3e}")
            wells.append(r)
            curv.append(c)
    if len(wells) < 2:
        raise PotentialError(f"{p.name} has {len(wells)} well(s) in {bracket}; at least two are required")
    return WellSet(tuple(wells), tuple(curv))


def truncated(p: Potential, probe_factor: float = 10.0) -> Potential:
    """C^2 potential equal to W on [-2 Mbar, 2 Mbar], quadratic beyond.

    The quadratic continuation is the second-order Taylor polynomial at
    +-2 Mbar, so W~ <= W provided W'' does not drop below its value at the
    junction further out; this is verified on a probe grid.
    """
    if p.mbar is None:
        raise PotentialError(f"{p.name} has no coercivity bound Mbar; cannot truncate")
    m2 = 2.0 * p.mbar
    ends = np.array([-m2, m2])
    w0, w1, w2 = (np.asarray(f(ends), dtype=float) for f in (p.w, p.dw, p.ddw))
    if np.any(w2 <= 0):
        raise PotentialError("W'' must be positive at +-2 Mbar for the quadratic continuation")

    def _pieces(t):
        t = np.asarray(t, dtype=float)
        side = np.where(t > m2, 1, np.where(t < -m2, 0, -1))
        d = t - np.where(side == 1, m2, -m2)
        return t, side, d

    def w(t):
        t, side, d = _pieces(t)
        inner = p.w(np.clip(t, -m2, m2))
        k = np.clip(side, 0, 1)
        outer = w0[k] + w1[k] * d + 0.5 * w2[k] * d * d
        return np.where(side < 0, inner, outer)

    def dw(t):
        t, side, d = _pieces(t)
        k = np.clip(side, 0, 1)
        return np.where(side < 0, p.dw(np.clip(t, -m2, m2)), w1[k] + w2[k] * d)

    def ddw(t):
        t, side, d = _pieces(t)
        k = np.clip(side, 0, 1)
        return np.where(side < 0, p.ddw(np.clip(t, -m2, m2)), w2[k] + 0 * d)

    grid = np.linspace(-m2, m2, 2001)
    bound = float(np.max(np.abs(p.ddw(grid))))
    far = np.linspace(-probe_factor * p.mbar, probe_factor * p.mbar, 4001)
    if np.any(w(far) > p.w(far) + 1e-12 * np.maximum(1.0, np.abs(p.w(far)))):
        raise PotentialError("quadratic continuation exceeds W; truncation requires W'' nondecreasing past 2 Mbar")
    return Potential(p.name + "~", w, dw, ddw, p.mbar, dict(p.params, truncated=True), bound)
