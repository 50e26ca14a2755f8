"""TOML run configuration and the objects it describes.

A configuration holds the tables ``geometry``, ``potential``, ``seed``,
``family``, ``sweep``, ``mesh``, ``solver`` and optionally ``limits``. See
``configs/`` for complete examples.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import PreconditionError
from .geometry import BulkDomain, DumbbellSpec, NeckProfile, ScalingFamily
from .mesh import MeshParams
from .minimize import SeedSpec, SolverControls
from .potential import Potential
from .potential import from_config as potential_from_config

DEFAULTS = {
    "name": "run",
    "rng_seed": 0,
    "output_dir": "runs",
    "geometry": {"width": 2.0, "height": 2.0, "f1": 0.5, "f2": 0.5},
    "potential": {"name": "quartic"},
    "seed": {"alpha": -1.0, "beta": 1.0},
    "family": {"kind": "power", "c": 1.0, "exponent": 1.0},
    "sweep": {"eps0": 0.2, "ratio": 0.5, "n": 6},
    "mesh": {},
    "solver": {},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return normalize(raw)


def loads_config(text: str) -> dict:
    return normalize(tomllib.loads(text))


def normalize(raw: dict) -> dict:
    return _merge(DEFAULTS, raw)


def config_hash(cfg: dict) -> str:
    """Stable 12-hex digest of the run-defining part of a config."""
    body = {k: v for k, v in cfg.items() if k not in ("output_dir",)}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _profile_fn(spec):
    """Constant, or ascending polynomial coefficients in x."""
    if isinstance(spec, (int, float)):
        return float(spec)
    coeffs = np.asarray(spec, dtype=float)
    return lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)


def build_neck(g: dict) -> NeckProfile:
    f1, f2 = g.get("f1", 0.5), g.get("f2", g.get("f1", 0.5))
    if isinstance(f1, (int, float)) and isinstance(f2, (int, float)):
        return NeckProfile.constant(float(f1), float(f2))
    a, b = _profile_fn(f1), _profile_fn(f2)
    fa = a if callable(a) else (lambda x, c=a: np.full(np.shape(x), c))
    fb = b if callable(b) else (lambda x, c=b: np.full(np.shape(x), c))
    return NeckProfile(fa, fb, n_knots=int(g.get("n_knots", 65)))


def build_spec(g: dict) -> DumbbellSpec:
    neck = build_neck(g)
    if "left" in g or "right" in g:
        r0 = float(g["r0"])
        left = BulkDomain(np.asarray(g["left"], dtype=float), "left", r0)
        right = BulkDomain(np.asarray(g["right"], dtype=float), "right", r0)
        return DumbbellSpec(left, right, neck, convex_bulks=bool(g.get("convex_bulks", False)))
    return DumbbellSpec.symmetric_rectangles(float(g["width"]), float(g["height"]), neck, g.get("r0"))


def build_potential(p: dict) -> Potential:
    return potential_from_config(p)


def build_family(f: dict) -> ScalingFamily:
    return ScalingFamily(f["kind"], float(f["c"]), float(f["exponent"]))


def eps_list(s: dict) -> list[float]:
    if "eps" in s:
        eps = [float(e) for e in s["eps"]]
    else:
        eps = [float(s["eps0"]) * float(s["ratio"]) ** k for k in range(int(s["n"]))]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise PreconditionError("eps list must be strictly decreasing")
    if any(e <= 0 for e in eps):
        raise PreconditionError("eps values must be positive")
    return eps


def build_seed(s: dict) -> SeedSpec:
    return SeedSpec(float(s["alpha"]), float(s["beta"]), s.get("d"))


def build_mesh_params(m: dict) -> MeshParams:
    return MeshParams.from_dict(m)


def build_controls(c: dict) -> SolverControls:
    return SolverControls.from_dict(c)


def run_dir(cfg: dict, root=None) -> Path:
    base = Path(root if root is not None else cfg.get("output_dir", "runs"))
    return base / f"{cfg.get('name', 'run')}-{config_hash(cfg)}"
