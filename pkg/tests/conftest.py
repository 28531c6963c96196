import numpy as np
import pytest

from src.geometry.quadrature import build_quadrature
from src.tree.bergman_tree import BergmanTree, TreeParams, build_tree, build_tree_family
from src.tree.tents import TentSystem

SMALL_PARAMS = TreeParams(R=0.7, delta=0.35, depth=2, d=1)


@pytest.fixture(scope="module")
def small_rule():
    return build_quadrature(1, "polar-grid", size=24, angular=48, grading=0.9)


@pytest.fixture(scope="module")
def small_tree():
    return build_tree(SMALL_PARAMS)


@pytest.fixture(scope="module")
def small_system(small_rule):
    return TentSystem(build_tree_family(SMALL_PARAMS, 2), small_rule)


def circle_tree(level_angles, level_parents, R=0.7, delta=0.35):
    """A d = 1 tree with hand-placed net directions."""
    directions = [np.exp(1j * np.asarray(a, dtype=float)).reshape(-1, 1) for a in level_angles]
    parents = [np.asarray(p, dtype=int) for p in level_parents]
    return BergmanTree(TreeParams(R=R, delta=delta, depth=len(directions)), directions, parents)
