import numpy as np
import pytest

from dumbbell.fem import DiscreteOperator
from dumbbell.geometry import DumbbellSpec, NeckProfile, assemble_dumbbell
from dumbbell.mesh import MeshParams, triangulate, triangulate_polygon
from dumbbell.potential import quartic

UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]


@pytest.fixture(scope="session")
def square_op():
    return DiscreteOperator(triangulate_polygon(UNIT_SQUARE, 0.08))


@pytest.fixture(scope="session")
def small_dumbbell():
    spec = DumbbellSpec.symmetric_rectangles(neck=NeckProfile.constant(0.5))
    geom = assemble_dumbbell(spec, 0.1, 0.1)
    mesh = triangulate(geom, MeshParams(h_bulk=0.1))
    return geom, mesh, DiscreteOperator(mesh)


@pytest.fixture(scope="session")
def qw():
    return quartic()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
