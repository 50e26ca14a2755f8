"""Closed-form limit constants for the five neck regimes.

Everything here is a pure function of the wells (alpha, beta), the neck
resistance m = int_{-1}^{1} dx / (f1 + f2) and, where it applies, the regime
limit ell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import PreconditionError
from .geometry import CRITICAL, NORMAL, SUBCRITICAL, SUPERCRITICAL, THICK, NeckProfile, Regime

PI = math.pi


def m_f1f2(neck: NeckProfile, tol: float = 1e-12) -> float:
    """Effective 1D resistance of the neck, integrated knot interval by knot interval."""
    xs = np.linspace(-1.0, 1.0, 16 * neck.knots.size + 1)
    if np.min(neck.total(xs)) <= 0:
        raise PreconditionError("f1 + f2 must be positive")
    tot = neck.f1_values + neck.f2_values
    if np.all(tot == tot[0]):
        # the spline through equal knot values is that constant
        return 2.0 / float(tot[0])
    k = neck.knots
    total = 0.0
    for a, b in zip(k[:-1], k[1:]):
        val, err = quad(lambda x: 1.0 / neck.total(x), a, b, epsabs=tol / len(k), epsrel=0.0, limit=200)
        total += val
    return total


def neck_1d(theta_minus: float, theta_plus: float, neck: NeckProfile):
    """Minimiser of int (f1+f2)/2 theta'^2 with theta(+-1) = theta_+-.

    Returns ``(theta, energy)`` where ``theta`` is a vectorised callable.
    """
    m = m_f1f2(neck)
    knots = neck.knots
    # cumulative resistance at the knots, then quadrature from the nearest knot
    cum = np.zeros(knots.size)
    for i in range(1, knots.size):
        cum[i] = cum[i - 1] + quad(lambda s: 1.0 / neck.total(s), knots[i - 1], knots[i], epsabs=1e-14)[0]

    def resistance(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for j, xj in enumerate(x):
            if not -1.0 - 1e-12 <= xj <= 1.0 + 1e-12:
                raise PreconditionError("theta is defined on [-1, 1] only")
            i = int(np.clip(np.searchsorted(knots, xj) - 1, 0, knots.size - 2))
            out[j] = cum[i] + quad(lambda s: 1.0 / neck.total(s), knots[i], xj, epsabs=1e-14)[0]
        return out

    jump = theta_plus - theta_minus

    def theta(x):
        scalar = np.ndim(x) == 0
        val = theta_minus + jump * resistance(x) / m
        return float(val[0]) if scalar else val

    theta.derivative = lambda x: jump / (m * neck.total(np.asarray(x, dtype=float)))
    return theta, jump**2 / (2.0 * m)


def critical_boundary_values(alpha: float, beta: float, m: float, ell: float) -> tuple[float, float]:
    """Port values theta_-+ of the critical thin neck."""
    if m <= 0 or ell <= 0:
        raise PreconditionError("m and ell must be positive")
    mid = 0.5 * (alpha + beta)
    half = PI * m * (beta - alpha) / (2.0 * (PI * m + 2.0 * ell))
    return mid - half, mid + half


def critical_neck_energy(alpha, beta, m, ell):
    return ell * PI**2 * m * (beta - alpha) ** 2 / (2.0 * (PI * m + 2.0 * ell) ** 2)


def critical_bulk_excess(alpha, beta, m, ell):
    return (beta - alpha) ** 2 * ell**2 * PI / (PI * m + 2.0 * ell) ** 2


def critical_total_excess(alpha, beta, m, ell):
    return (beta - alpha) ** 2 * PI * ell / (2.0 * (m * PI + 2.0 * ell))


def log_regime_excess(alpha, beta):
    """pi (beta - alpha)^2 / 4: normal, thick and supercritical limits."""
    return PI * (beta - alpha) ** 2 / 4.0


def subcritical_excess(alpha, beta, m):
    return (beta - alpha) ** 2 / (2.0 * m)


@dataclass
class RegimeTarget:
    regime: Regime
    alpha: float
    beta: float
    m: float | None
    constants: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.constants[key]

    def get(self, key, default=None):
        return self.constants.get(key, default)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.tag,
            "ell": self.regime.ell,
            "alpha": self.alpha,
            "beta": self.beta,
            "m": self.m,
            "constants": dict(self.constants),
        }


def regime_targets(regime: Regime, alpha: float, beta: float, m: float | None = None) -> RegimeTarget:
    """Named limit constants of the regime (entries only where defined)."""
    mid = 0.5 * (alpha + beta)
    c: dict[str, float] = {}
    if regime.tag in (NORMAL, THICK):
        c["total_excess"] = log_regime_excess(alpha, beta)
        c["u_center"] = mid
    elif regime.tag == SUPERCRITICAL:
        c["total_excess"] = log_regime_excess(alpha, beta)
        c["bulk_excess"] = c["total_excess"]
        c["neck_energy"] = 0.0
        c["u_left_port"] = c["u_right_port"] = mid
    elif regime.tag == CRITICAL:
        if m is None:
            raise PreconditionError("critical thin targets need m")
        ell = regime.ell
        c["neck_energy"] = critical_neck_energy(alpha, beta, m, ell)
        c["bulk_excess"] = critical_bulk_excess(alpha, beta, m, ell)
        c["total_excess"] = critical_total_excess(alpha, beta, m, ell)
        lo, hi = critical_boundary_values(alpha, beta, m, ell)
        c["theta_minus"] = c["u_left_port"] = lo
        c["theta_plus"] = c["u_right_port"] = hi
    elif regime.tag == SUBCRITICAL:
        if m is None:
            raise PreconditionError("subcritical targets need m")
        c["total_excess"] = c["neck_energy"] = subcritical_excess(alpha, beta, m)
        c["bulk_excess"] = 0.0
        c["theta_minus"] = c["u_left_port"] = alpha
        c["theta_plus"] = c["u_right_port"] = beta
    else:
        raise PreconditionError(f"unknown regime {regime.tag}")
    return RegimeTarget(regime, alpha, beta, m, c)


def renormalized_energy(theta1, theta2, alpha, beta, m, ell):
    """Limit of the |ln delta|-rescaled excess for port values (theta1, theta2)."""
    if m <= 0 or ell <= 0:
        raise PreconditionError("m and ell must be positive")
    return (
        ell * (theta2 - theta1) ** 2 / (2.0 * m)
        + PI * (alpha - theta1) ** 2 / 2.0
        + PI * (beta - theta2) ** 2 / 2.0
    )


def renormalized_min(alpha, beta, m, ell) -> tuple[float, float, float]:
    # stationarity: 2x2 linear system solved in closed form
    t1, t2 = critical_boundary_values(alpha, beta, m, ell)
    return t1, t2, critical_total_excess(alpha, beta, m, ell)


def barrier(rho0: float, rho1: float, a: float, b: float, d: float, sign: int):
    """Radial sub/supersolution u^-/u^+ on the half annulus rho0 < r < rho1.

    ``sign=+1`` gives the upper barrier, ``-1`` the lower one.
    """
    if not 0 < rho0 < rho1:
        raise PreconditionError("barrier needs 0 < rho0 < rho1")
    if d < 0:
        raise PreconditionError("d must be non-negative")
    if sign not in (1, -1):
        raise PreconditionError("sign must be +1 or -1")
    slope = ((b - a) + sign * d * (rho1**2 - rho0**2) / 4.0) / math.log(rho1 / rho0)
    offset = a + sign * d * rho0**2 / 4.0

    def u(r):
        r = np.asarray(r, dtype=float)
        return -sign * d * r**2 / 4.0 + slope * np.log(r / rho0) + offset

    return u


def _check_gamma(gamma):
    if not 0 < gamma < 1:
        raise PreconditionError("gamma must lie in (0, 1)")


def xi_energy_limit(alpha, beta, gamma):
    """Rescaled energy limit of the log-annulus test field of width exponent gamma."""
    _check_gamma(gamma)
    return (beta - alpha) ** 2 / 4.0 * PI / (1.0 - gamma)


def z_energy_limit(alpha, beta, m, ell, gamma):
    """Dirichlet energy limit of the critical-thin test field."""
    _check_gamma(gamma)
    return (beta - alpha) ** 2 * PI * ell / (2.0 * (m * PI + 2.0 * ell) ** 2) * (m * PI + 2.0 * ell / (1.0 - gamma))


def identity_report(n: int = 1000, seed: int = 0) -> dict:
    """Randomised consistency checks of the closed forms; returns worst errors."""
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-3, 3, n)
    beta = alpha + rng.uniform(0.1, 4, n) * rng.choice([-1, 1], n)
    m = rng.uniform(0.1, 5, n)
    ell = rng.uniform(0.05, 10, n)
    split = np.abs(
        critical_neck_energy(alpha, beta, m, ell) + critical_bulk_excess(alpha, beta, m, ell)
        - critical_total_excess(alpha, beta, m, ell)
    )
    var_err, arg_err, val_err, convex_fail = 0.0, 0.0, 0.0, 0
    for a, b, mm, ll in zip(alpha, beta, m, ell):
        t1, t2, val = renormalized_min(a, b, mm, ll)
        # independent route: solve the 2x2 normal equations of RE
        A = np.array([[ll / mm + PI, -ll / mm], [-ll / mm, ll / mm + PI]])
        rhs = np.array([PI * a, PI * b])
        s1, s2 = np.linalg.solve(A, rhs)
        arg_err = max(arg_err, abs(s1 - t1), abs(s2 - t2))
        val_err = max(val_err, abs(renormalized_energy(s1, s2, a, b, mm, ll) - val))
        val_err = max(val_err, abs(val - (b - a) ** 2 * PI * ll / (2 * (mm * PI + 2 * ll))))
        p1, p2 = rng.normal(0, 0.5, 2)
        if renormalized_energy(t1 + p1, t2 + p2, a, b, mm, ll) <= val:
            convex_fail += 1
    return {
        "n": n,
        "seed": seed,
        "split_identity_max_err": float(split.max()),
        "argmin_max_err": float(arg_err),
        "min_value_max_err": float(val_err),
        "convexity_failures": convex_fail,
        "pass": bool(split.max() <= 1e-12 and arg_err <= 1e-12 and val_err <= 1e-12 and convex_fail == 0),
    }
