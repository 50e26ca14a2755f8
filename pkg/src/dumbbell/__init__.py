"""Allen-Cahn critical points on dumbbell domains and their thin-neck limits."""

from .closedform import m_f1f2, neck_1d, regime_targets
from .errors import DumbbellError
from .fem import DiscreteOperator, Field
from .geometry import DumbbellSpec, NeckProfile, Regime, ScalingFamily, assemble_dumbbell, classify_regime
from .kernels import BACKEND
from .mesh import MeshParams, TriMesh, triangulate
from .minimize import SeedSpec, SolverControls, solve_critical_point
from .potential import Potential, find_wells, quartic, triple

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DiscreteOperator", "DumbbellError", "DumbbellSpec", "Field", "MeshParams", "NeckProfile",
    "Potential", "Regime", "ScalingFamily", "SeedSpec", "SolverControls", "TriMesh", "assemble_dumbbell",
    "classify_regime", "find_wells", "m_f1f2", "neck_1d", "quartic", "regime_targets", "solve_critical_point",
    "triangulate", "triple",
]
