"""
The two tent-covering lemmas, measured on rule nodes: a Carleson tent inside
a comparable dyadic tent of some tree of the family, and a dyadic tent inside
a comparable Carleson tent. Volumes are taken inside each tree's horizon.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.errors import CoveringError, DomainError, StarvationError
from src.geometry.ball import BallPoint, CarlesonTent, inner
from src.geometry.quadrature import QuadratureRule
from src.tree.bergman_tree import BergmanTree, TreeNode
from src.tree.tents import TentSystem

logger = logging.getLogger(__name__)

# apexes from this tree level on must be covered by a proper subtree tent
DEEP_APEX_LEVEL = 2


@dataclass(frozen=True, eq=False)
class DyadicCover:
    tree_index: int
    node: TreeNode
    ratio: float  # ν(K̂_α) / ν(T_z)
    violations: int  # rule nodes of T_z outside K̂_α

    def to_row(self) -> dict:
        return {"tree": self.tree_index, "node": self.node.label, "ratio": self.ratio, "violations": self.violations}


@dataclass(frozen=True, eq=False)
class CarlesonCover:
    tent: CarlesonTent
    ratio: float  # ν(T_z) / ν(K̂_α)
    violations: int  # rule nodes of K̂_α outside T_z

    def to_row(self) -> dict:
        apex = None if self.tent.is_origin else self.tent.apex.norm
        return {"apex_norm": apex, "ratio": self.ratio, "violations": self.violations}


def deepest_common_ancestor(ancestors: np.ndarray) -> int:
    """Deepest node shared by every row of an ancestor table (rows of located nodes)."""
    for level in range(ancestors.shape[1] - 1, -1, -1):
        column = ancestors[:, level]
        if column[0] >= 0 and np.all(column == column[0]):
            return int(column[0])
    return 0


def covering_dyadic_tent(
    trees: Sequence[BergmanTree],
    tent: CarlesonTent,
    rule: QuadratureRule,
    system: Optional[TentSystem] = None,
) -> DyadicCover:
    """Minimal-volume dyadic tent, over all trees, containing the rule nodes of T_z."""
    system = system or TentSystem(trees, rule)
    in_tent = tent.contains(rule.nodes)

    best = None
    for index, (tree, measure) in enumerate(zip(system.trees, system.measures)):
        rows = np.flatnonzero(in_tent & (measure.located >= 0))
        if rows.size == 0:
            continue
        node = deepest_common_ancestor(measure.ancestors[rows])
        volume = measure.tent_mass[node]
        if best is None or volume < best[2]:
            tent_volume = float(np.sum(rule.masses[rows]))
            best = (index, node, volume, tent_volume)

    if best is None:
        raise CoveringError("the Carleson tent captures no rule node inside any horizon")
    index, node, volume, tent_volume = best
    tree = system.trees[index]

    if node == 0 and not tent.is_origin:
        apex_level = int(tree.levels_of(tent.apex.coords[None, :])[0])
        if apex_level >= DEEP_APEX_LEVEL:
            raise CoveringError(
                f"only root tents cover T_z with apex at level {apex_level}; increase the family size or depth"
            )

    measure = system.measures[index]
    level = tree.node_level[node]
    covered = measure.ancestors[:, level] == node
    violations = int(np.count_nonzero(in_tent & (measure.located >= 0) & ~covered))
    return DyadicCover(index, tree.node(node), volume / tent_volume, violations)


def covering_carleson_tent(
    tree: BergmanTree,
    node: TreeNode,
    rule: QuadratureRule,
    system: Optional[TentSystem] = None,
) -> CarlesonCover:
    """
    Smallest Carleson tent with apex on the ray through the kube centre that
    contains every rule node of K̂_α: apex norm s* = min over those nodes of
    1 − |1 − ⟨ζ, u⟩|, u the centre direction; s* ≤ 0 gives T₀.
    """
    system = system or TentSystem([tree], rule)
    index = next((i for i, t in enumerate(system.trees) if t is tree), None)
    if index is None:
        raise DomainError("the tree is not one of the tent system's trees")
    measure = system.measures[index]
    in_dyadic = measure.ancestors[:, node.level] == node.id
    horizon = measure.located >= 0

    if not np.any(in_dyadic):
        raise StarvationError(f"dyadic tent {node.label} captures no rule node")
    if node.is_root:
        cover = CarlesonTent.origin()
    else:
        direction = node.center.coords / node.center.norm
        slack = 1.0 - np.abs(1.0 - inner(rule.nodes[in_dyadic], direction))
        apex_norm = float(np.min(slack))
        cover = CarlesonTent.origin() if apex_norm <= 0.0 else CarlesonTent(BallPoint(apex_norm * direction))

    in_carleson = cover.contains(rule.nodes) & horizon
    dyadic_volume = float(np.sum(rule.masses[in_dyadic]))
    ratio = float(np.sum(rule.masses[in_carleson])) / dyadic_volume
    violations = int(np.count_nonzero(in_dyadic & ~cover.contains(rule.nodes)))
    return CarlesonCover(cover, ratio, violations)
