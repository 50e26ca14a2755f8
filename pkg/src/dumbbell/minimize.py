"""Nearly locally constant critical points: descent, Newton polish, stability."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import BudgetError, EigenError, PreconditionError, SeedError
from .fem import DiscreteOperator, Field
from .geometry import REGION_LEFT, REGION_NECK, REGION_RIGHT
from .mesh import TriMesh
from .potential import Potential, WellSet, truncated

MACHINE_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SeedSpec:
    alpha: float
    beta: float
    d: float | None = None  # L1 radius of the admissible ball; default set from the mesh

    def __post_init__(self):
        if self.d is not None and self.d <= 0:
            raise PreconditionError("d must be positive")

    def check(self, wells: WellSet | None) -> None:
        if wells is None:
            return
        for t in (self.alpha, self.beta):
            if t not in wells:
                raise SeedError(f"seed value {t} is not a well; wells are {list(wells.wells)}")

    def radius(self, op: DiscreteOperator) -> float:
        if self.d is not None:
            return self.d
        jump = abs(self.beta - self.alpha) or 1.0
        bulk = min(op.region_mass(REGION_LEFT).sum(), op.region_mass(REGION_RIGHT).sum())
        if bulk <= 0:
            bulk = op.area
        return 0.25 * jump * bulk


@dataclass(frozen=True)
class SolverControls:
    tau: float | None = None
    phase1_tol: float = 1e-4
    tol_crit: float | None = None  # default 1e-9 |Omega|^(1/2)
    max_flow_steps: int = 20000
    tau_growth: float = 1.0
    max_tau: float = 1.0
    max_newton: int = 40
    cg_rtol: float = 1e-10
    cg_maxiter: int = 20000
    eig_tol: float = 1e-7  # eigenvalue error scales like its square
    eig_block: int = 8
    eig_maxiter: int = 2000
    compute_eig: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> SolverControls:
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class MinimizerReport:
    field: Field
    energy: float
    residual: float
    tol_crit: float
    lambda_min: float | None
    lambda0: float
    seed: SeedSpec
    probes: dict = field(default_factory=dict)
    L1_left: float = 0.0
    L1_right: float = 0.0
    c_eps: float | None = None
    neck_energy: float | None = None
    iterations: dict = field(default_factory=dict)
    constraint_active: bool = False
    max_L1_drift: float = 0.0
    roundoff_floor: float = 0.0
    converged: bool = True
    energy_history: list = field(default_factory=list, repr=False)
    wall_time: float = 0.0

    @property
    def u(self) -> np.ndarray:
        return self.field.values

    @property
    def is_constant(self) -> bool:
        return self.seed.alpha == self.seed.beta

    def to_dict(self) -> dict:
        return {
            "alpha": self.seed.alpha,
            "beta": self.seed.beta,
            "d": self.seed.d,
            "energy": self.energy,
            "residual": self.residual,
            "tol_crit": self.tol_crit,
            "roundoff_floor": self.roundoff_floor,
            "lambda_min": self.lambda_min,
            "lambda0": self.lambda0,
            "probes": dict(self.probes),
            "L1_left": self.L1_left,
            "L1_right": self.L1_right,
            "c_eps": self.c_eps,
            "neck_energy": self.neck_energy,
            "iterations": dict(self.iterations),
            "constraint_active": self.constraint_active,
            "max_L1_drift": self.max_L1_drift,
            "converged": self.converged,
            "wall_time": self.wall_time,
            "mesh_token": self.field.token,
        }


def initial_guess(mesh: TriMesh, seed: SeedSpec, wells: WellSet | None = None) -> np.ndarray:
    """alpha on the left bulk, beta on the right bulk, the midpoint in the neck."""
    seed.check(wells)
    reg = mesh.node_regions()
    u = np.full(mesh.n_nodes, 0.5 * (seed.alpha + seed.beta))
    u[reg == REGION_LEFT] = seed.alpha
    u[reg == REGION_RIGHT] = seed.beta
    if seed.alpha == seed.beta:
        u[:] = seed.alpha
    return u


def default_tau(p: Potential) -> float:
    m = p.mbar if p.mbar is not None else 2.0
    grid = np.linspace(-m, m, 2001)
    return 1.0 / (2.0 * float(np.max(np.abs(p.ddw(grid)))))


def roundoff_floor(op: DiscreteOperator, p: Potential, u: np.ndarray) -> float:
    """Dual-norm residual caused by rounding u itself to double precision.

    No representable field can have a smaller residual, so solves whose
    residual reaches a small multiple of this are roundoff limited.
    """
    K = op.K
    mag = abs(K) @ np.abs(u) + op.mass * np.abs(u) * np.abs(p.ddw(u))
    return float(0.5 * MACHINE_EPS * np.sqrt(np.sum(mag * mag / op.mass)))


def _linear_solve(J: sp.csr_matrix, rhs: np.ndarray, controls: SolverControls) -> tuple[np.ndarray, int, bool]:
    """Jacobi-PCG first; sparse direct if CG stalls (indefinite or ill-conditioned J)."""
    x, it, rel = kernels.pcg_jacobi(
        J.indptr.astype(np.int32), J.indices.astype(np.int32), J.data, rhs, np.zeros_like(rhs),
        controls.cg_rtol, controls.cg_maxiter,
    )
    if np.all(np.isfinite(x)) and rel <= controls.cg_rtol * 10:
        return np.asarray(x), int(it), False
    return spla.spsolve(J.tocsc(), rhs), int(it), True


def gradient_flow(op, pt: Potential, u, u0, controls: SolverControls, stats: dict):
    """Semi-implicit descent (M/tau + K) u+ = (M/tau) u - M W'(u) down to phase1_tol."""
    tau = controls.tau
    m = op.mass
    lu = spla.splu((op.K + sp.diags(m / tau)).tocsc())
    E = op.energy(pt, u)
    history = [E]
    halvings = streak = 0
    drift = op.L1_distance(u, u0)
    for k in range(controls.max_flow_steps):
        g = op.gradient(pt, u)
        res = op.residual_norm(pt, g=g)
        if res <= controls.phase1_tol:
            stats.update(flow_steps=k, tau_final=tau, tau_halvings=halvings)
            return u, history, drift, res
        new = lu.solve(m / tau * u - m * pt.dw(u))
        E_new = op.energy(pt, new)
        if E_new > E + 1e-13 * max(1.0, abs(E)):
            tau *= 0.5
            halvings += 1
            streak = 0
            if tau < 1e-14:
                raise BudgetError("gradient flow step collapsed", residual=res)
            lu = spla.splu((op.K + sp.diags(m / tau)).tocsc())
            continue
        u, E = new, E_new
        history.append(E)
        drift = max(drift, op.L1_distance(u, u0))
        streak += 1
        if controls.tau_growth > 1.0 and streak >= 10 and tau * controls.tau_growth <= controls.max_tau:
            tau *= controls.tau_growth
            streak = 0
            lu = spla.splu((op.K + sp.diags(m / tau)).tocsc())
    raise BudgetError(f"gradient flow did not reach {controls.phase1_tol:g} in {controls.max_flow_steps} steps", res)


def newton(op, p: Potential, u, tol, controls: SolverControls, stats: dict):
    """Damped Newton on K u + m W'(u) = 0 with a residual-decrease line search."""
    g = op.gradient(p, u)
    res = op.residual_norm(p, g=g)
    cg_total = direct = 0
    stalled = 0
    floor = roundoff_floor(op, p, u)
    for it in range(controls.max_newton):
        floor = roundoff_floor(op, p, u)
        if res <= tol:
            break
        if res <= 8 * floor and stalled >= 2:
            break
        J = op.jacobian(p, u)
        s, cg_it, used_direct = _linear_solve(J, -g, controls)
        cg_total += cg_it
        direct += used_direct
        t = 1.0
        while True:
            trial = u + t * s
            g_t = op.gradient(p, trial)
            r_t = op.residual_norm(p, g=g_t)
            if r_t < (1 - 1e-4 * t) * res or t < 1e-3:
                break
            t *= 0.5
        stalled = stalled + 1 if r_t > 0.5 * res else 0
        if r_t >= res and t < 1e-3:
            stalled += 1
            if res <= 8 * floor:
                break
            if stalled > 3:
                break
            continue
        u, g, res = trial, g_t, r_t
    stats.update(newton_steps=it, cg_iterations=cg_total, direct_solves=direct)
    return u, res, floor


def smallest_eigenvalue(op: DiscreteOperator, p: Potential, u, controls: SolverControls | None = None, n_eig: int = 1):
    """Smallest eigenpairs of (K + M diag W''(u)) phi = lambda M phi.

    Shifted inverse subspace iteration with Rayleigh-Ritz; the shift
    min W''(u) - 1 lies strictly below the spectrum, so the shifted matrix is
    SPD and one factorisation serves every iteration. Converged vectors are
    locked and deflated from the active block.
    """
    controls = controls or SolverControls()
    v = op.values(u)
    m = op.mass
    w2 = p.ddw(v)
    sigma = float(np.min(w2)) - 1.0
    A = op.K + sp.diags(m * (w2 - sigma))
    lu = spla.splu(A.tocsc())
    H = op.K + sp.diags(m * w2)
    Habs = abs(op.K) + sp.diags(m * np.abs(w2))
    n = v.size
    k = min(max(controls.eig_block, n_eig + 2), n)
    rng = np.random.default_rng(20240611)
    X = rng.standard_normal((n, k))
    X[:, 0] = 1.0
    locked: list[np.ndarray] = []
    lam_locked: list[float] = []

    def m_orth(Y):
        for z in locked:
            Y -= np.outer(z, (z * m) @ Y)
        G = Y.T @ (m[:, None] * Y)
        w, V = np.linalg.eigh(G)
        keep = w > 1e-14 * w.max()
        return Y @ (V[:, keep] / np.sqrt(w[keep]))

    X = m_orth(X)
    best, since = np.inf, 0
    for it in range(controls.eig_maxiter):
        Y = lu.solve(m[:, None] * X) if X.ndim == 2 else lu.solve(m * X)
        Y = m_orth(Y)
        T = Y.T @ (H @ Y)
        theta, V = np.linalg.eigh(0.5 * (T + T.T))
        X = Y @ V
        R = H @ X - (m[:, None] * X) * theta
        rn = np.sqrt(np.sum(R * R / m[:, None], axis=0))
        # representation error of the residual itself (same floor as the Newton acceptance)
        Xa = np.abs(X)
        fl = 0.5 * np.finfo(float).eps * (Habs @ Xa + (m[:, None] * Xa) * np.abs(theta))
        floor = np.sqrt(np.sum(fl * fl / m[:, None], axis=0))
        conv = rn <= np.maximum(controls.eig_tol * np.maximum(1.0, np.abs(theta)), 8.0 * floor)
        # lock leading converged vectors only, keeping the order of the spectrum
        j = 0
        while j < len(theta) and conv[j] and len(locked) < n_eig:
            locked.append(X[:, j].copy())
            lam_locked.append(float(theta[j]))
            j += 1
        if len(locked) >= n_eig:
            return np.array(lam_locked), np.column_stack(locked), it + 1
        if j:
            X = X[:, j:]
            if X.shape[1] < 2 and n > len(locked) + 2:
                X = np.column_stack([X, rng.standard_normal((n, 2))])
            X = m_orth(X)
        if rn[0] < 0.99 * best:
            best, since = rn[0], 0
        else:
            since += 1
            if since > 50:
                raise EigenError(f"eigen solver stagnated at lambda={theta[0]:.6g}, residual {rn[0]:.3e}")
    raise EigenError(f"eigen solver did not converge in {controls.eig_maxiter} iterations (residual {rn[0]:.3e})")


def _probes(op: DiscreteOperator, u: np.ndarray) -> dict:
    meta = op.mesh.meta
    if meta.get("kind") != "dumbbell":
        return {}
    eps = meta["eps"]
    vals = op.probe(u, np.array([[0.0, 0.0], [-eps, 0.0], [eps, 0.0]]))
    return {"u_center": float(vals[0]), "u_left_port": float(vals[1]), "u_right_port": float(vals[2])}


def _c_eps(op: DiscreteOperator, u) -> float | None:
    meta = op.mesh.meta
    if meta.get("kind") != "dumbbell":
        return None
    return op.local_energy(u, (meta["eps"], 0.0), 2.0 * meta["M"] * meta["delta"])


def solve_critical_point(
    op: DiscreteOperator,
    p: Potential,
    seed: SeedSpec,
    controls: SolverControls | None = None,
    wells: WellSet | None = None,
    start: np.ndarray | None = None,
) -> MinimizerReport:
    """Descend from the seed (or ``start``) to a critical point and certify it."""
    t0 = time.perf_counter()
    controls = controls or SolverControls()
    seed.check(wells)
    pt = truncated(p) if p.mbar is not None else p
    tau = controls.tau if controls.tau is not None else default_tau(p)
    controls = replace(controls, tau=tau)
    tol = float(controls.tol_crit if controls.tol_crit is not None else op.tol_crit())
    u0 = initial_guess(op.mesh, seed)
    u = u0.copy() if start is None else np.array(op.values(start), dtype=float)
    d = seed.radius(op)
    stats: dict = {}
    u, history, drift, _ = gradient_flow(op, pt, u, u0, controls, stats)
    u, res, floor = newton(op, p, u, tol, controls, stats)
    drift = max(drift, op.L1_distance(u, u0))
    converged = bool(res <= tol or res <= 8 * floor)
    if not converged:
        raise BudgetError(f"Newton stopped at residual {res:.3e} > tol_crit {tol:.3e}", residual=res)
    lam = None
    if controls.compute_eig:
        vals, _, eig_it = smallest_eigenvalue(op, p, u, controls)
        lam = float(vals[0])
        stats["eig_iterations"] = eig_it
    fld = op.field(u)
    parts = op.energy_parts(p, u)
    lam0 = float(min(p.ddw(np.array(seed.alpha)), p.ddw(np.array(seed.beta))))
    return MinimizerReport(
        field=fld,
        energy=op.energy(p, fld),
        residual=res,
        tol_crit=tol,
        lambda_min=lam,
        lambda0=lam0,
        seed=seed,
        probes=_probes(op, u),
        L1_left=op.region_L1_distance(u, REGION_LEFT, seed.alpha),
        L1_right=op.region_L1_distance(u, REGION_RIGHT, seed.beta),
        c_eps=_c_eps(op, u),
        neck_energy=parts["neck_energy"],
        iterations=stats,
        constraint_active=bool(drift > d),
        max_L1_drift=drift,
        roundoff_floor=floor,
        converged=converged,
        energy_history=history,
        wall_time=time.perf_counter() - t0,
    )


@dataclass
class UniquenessResult:
    max_distance: float
    n_runs: int
    rng_seed: int
    amplitude: float
    left_basin: list[int]
    reports: list[MinimizerReport] = field(repr=False, default_factory=list)

    def __float__(self):
        return self.max_distance


def _tag_run(exc: Exception, index: int) -> Exception:
    msg = f"perturbed run {index}: {exc}"
    if isinstance(exc, BudgetError):
        return BudgetError(msg, residual=exc.residual)
    try:
        return type(exc)(msg)
    except TypeError:
        return RuntimeError(msg)


def uniqueness_check(
    op: DiscreteOperator,
    p: Potential,
    seed: SeedSpec,
    n_perturb: int,
    amplitude: float,
    rng_seed: int = 0,
    controls: SolverControls | None = None,
) -> UniquenessResult:
    """Multi-start test of the uniqueness basin around the seed."""
    if n_perturb < 2:
        raise PreconditionError("n_perturb must be at least 2")
    controls = replace(controls or SolverControls(), compute_eig=False)
    rng = np.random.default_rng(np.uint64(rng_seed))
    u0 = initial_guess(op.mesh, seed)
    starts = [u0] + [u0 + rng.uniform(-amplitude, amplitude, u0.size) for _ in range(n_perturb)]
    reports = []
    for i, s in enumerate(starts):
        try:
            reports.append(solve_critical_point(op, p, seed, controls, start=s))
        except Exception as exc:  # tag with the run index and re-raise
            raise _tag_run(exc, i) from exc
    dist = 0.0
    for i in range(len(reports)):
        for j in range(i + 1, len(reports)):
            dist = max(dist, op.L2_distance(reports[i].field, reports[j].field))
    left = [i for i, r in enumerate(reports) if r.constraint_active]
    return UniquenessResult(dist, len(reports), rng_seed, amplitude, left, reports)


class StableStates(list):
    """Deduplicated stable critical points plus any classification findings."""

    def __init__(self, items=(), findings=None, rejected=None):
        super().__init__(items)
        self.findings = list(findings or [])
        self.rejected = list(rejected or [])

    @property
    def nonconstant(self) -> list[MinimizerReport]:
        return [r for r in self if not r.is_constant]

    @property
    def constants(self) -> list[MinimizerReport]:
        return [r for r in self if r.is_constant]


def enumerate_stable(
    op: DiscreteOperator,
    p: Potential,
    wells: WellSet,
    controls: SolverControls | None = None,
    dedup_tol: float = 1e-4,
    stable_tol: float = 1e-8,
    require_convex: bool = True,
) -> StableStates:
    """Solve from every ordered well pair and every constant; keep stable, distinct states."""
    if require_convex and not op.mesh.meta.get("convex_bulks", False):
        raise PreconditionError("classification needs certified convex bulks")
    accepted: list[MinimizerReport] = []
    findings, rejected = [], []
    seeds = [SeedSpec(a, b) for a in wells for b in wells]
    for seed in seeds:
        try:
            rep = solve_critical_point(op, p, seed, controls, wells)
        except (BudgetError, EigenError) as exc:
            rejected.append({"alpha": seed.alpha, "beta": seed.beta, "reason": str(exc)})
            continue
        if rep.lambda_min is None or rep.lambda_min < -stable_tol:
            rejected.append({"alpha": seed.alpha, "beta": seed.beta, "reason": f"unstable, lambda_min={rep.lambda_min}"})
            continue
        dup = next((q for q in accepted if op.L2_distance(q.field, rep.field) <= dedup_tol), None)
        if dup is None:
            accepted.append(rep)
        elif not (dup.is_constant or rep.is_constant) or dup.is_constant != rep.is_constant:
            findings.append(
                {
                    "kind": "classification-violation",
                    "seeds": [[dup.seed.alpha, dup.seed.beta], [seed.alpha, seed.beta]],
                    "distance": op.L2_distance(dup.field, rep.field),
                }
            )
    return StableStates(accepted, findings, rejected)
