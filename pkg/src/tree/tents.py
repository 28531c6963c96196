"""
Dyadic tents of a tree family measured by a quadrature rule.

Every rule node is located once per tree; the ancestor rows of the located
kubes give tent membership, so each tent integral is a bincount. The tents of
all trees form one SparseCollection whose majors are the kubes.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import sparse

from config import settings
from src.errors import StarvationError
from src.geometry.ball import as_coords
from src.geometry.quadrature import QuadratureRule
from src.operators.sparse import SparseCollection, row_max
from src.tree.bergman_tree import BergmanTree

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TreeMeasure:
    """Kube and tent masses of one tree under one rule."""

    located: np.ndarray  # node id per rule node, -1 beyond the horizon
    ancestors: np.ndarray  # (rule nodes, depth + 1)
    kube_mass: np.ndarray
    kube_count: np.ndarray
    tent_mass: np.ndarray


def measure_tree(tree: BergmanTree, rule: QuadratureRule) -> TreeMeasure:
    located = tree.locate(rule.nodes)
    table = tree.ancestor_table(located)
    inside = located >= 0
    kube_mass = np.bincount(located[inside], rule.masses[inside], minlength=tree.n_nodes)
    kube_count = np.bincount(located[inside], minlength=tree.n_nodes)
    tent_mass = np.zeros(tree.n_nodes)
    for level in range(tree.depth + 1):
        column = table[:, level]
        hit = column >= 0
        tent_mass += np.bincount(column[hit], rule.masses[hit], minlength=tree.n_nodes)
    return TreeMeasure(located, table, kube_mass, kube_count, tent_mass)


@dataclass(frozen=True, eq=False)
class SparsityCertificate:
    tau_hat: float
    per_node_ratios: np.ndarray  # NaN where the kube captured no node
    depth_used: int
    starved: np.ndarray  # node ids whose kube holds fewer than the threshold
    extremal_node: int

    @property
    def leaf_ratios(self) -> np.ndarray:
        return self.per_node_ratios[np.isfinite(self.per_node_ratios)]

    def to_row(self) -> dict:
        return {
            "tau_hat": self.tau_hat,
            "depth": self.depth_used,
            "starved": int(self.starved.size),
            "extremal_node": self.extremal_node,
        }


def sparsity_certificate(
    tree: BergmanTree,
    rule: QuadratureRule,
    min_nodes: Optional[int] = None,
    strict: bool = False,
) -> SparsityCertificate:
    """τ̂ = max ν(K̂_α)/ν(K_α) over nodes whose kube captured at least one rule node."""
    min_nodes = settings.MIN_KUBE_NODES if min_nodes is None else min_nodes
    measure = measure_tree(tree, rule)
    ratios = np.full(tree.n_nodes, np.nan)
    captured = measure.kube_mass > 0.0
    ratios[captured] = measure.tent_mass[captured] / measure.kube_mass[captured]

    starved = np.flatnonzero(measure.kube_count < min_nodes)
    if starved.size:
        message = f"{starved.size} of {tree.n_nodes} kubes hold fewer than {min_nodes} rule nodes"
        if strict:
            raise StarvationError(message)
        logger.warning(message)

    extremal = int(np.nanargmax(ratios))
    return SparsityCertificate(float(ratios[extremal]), ratios, tree.depth, starved, extremal)


class TentSystem:
    """
    The dyadic tents of a tree family as one sparse collection over the rule
    nodes. Set k carries the label (tree index, node id).
    """

    def __init__(self, trees: Sequence[BergmanTree], rule: QuadratureRule):
        self.trees = list(trees)
        self.rule = rule
        self.measures = [measure_tree(tree, rule) for tree in self.trees]
        families = [self._tree_collection(i) for i in range(len(self.trees))]
        self.collection = SparseCollection.union(families)
        self.inside = np.all([m.located >= 0 for m in self.measures], axis=0)
        logger.info(
            "tent system: %d trees, %d tents, %d of %d rule nodes inside every horizon",
            len(self.trees), self.collection.n_sets, int(self.inside.sum()), rule.size,
        )

    @classmethod
    def ensure(cls, trees: Union["TentSystem", Sequence[BergmanTree], BergmanTree], rule=None) -> "TentSystem":
        if isinstance(trees, TentSystem):
            return trees
        if isinstance(trees, BergmanTree):
            trees = [trees]
        return cls(trees, rule)

    def _tree_collection(self, index: int) -> SparseCollection:
        tree, measure = self.trees[index], self.measures[index]
        active = np.flatnonzero(measure.tent_mass > 0.0)
        empty = tree.n_nodes - active.size
        if empty:
            logger.warning("tree %d: %d tents capture no rule node and are skipped", index, empty)
        position = np.full(tree.n_nodes, -1, dtype=int)
        position[active] = np.arange(active.size)

        rows, cols = np.nonzero(measure.ancestors >= 0)
        cols = position[measure.ancestors[rows, cols]]
        shape = (self.rule.size, active.size)
        membership = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=shape)

        inside = np.flatnonzero(measure.located >= 0)
        majors = sparse.csr_matrix(
            (np.ones(inside.size), (inside, position[measure.located[inside]])), shape=shape
        )
        parent_nodes = tree.node_parent[active]
        parents = np.where(parent_nodes >= 0, position[np.maximum(parent_nodes, 0)], -1)

        captured = measure.kube_mass[active] > 0.0
        tau = float(np.max(measure.tent_mass[active][captured] / measure.kube_mass[active][captured], initial=1.0))
        return SparseCollection(
            membership, self.rule.masses, majors,
            labels=[(index, int(node)) for node in active],
            tau=tau, parents=parents,
        )

    # -- views ---------------------------------------------------------------

    @property
    def depth(self) -> int:
        return self.trees[0].depth

    @property
    def labels(self) -> tuple:
        return self.collection.labels

    @property
    def tent_masses(self) -> np.ndarray:
        return self.collection.set_masses

    def set_index(self, tree_index: int, node_id: int) -> int:
        return self.labels.index((tree_index, node_id))

    def tent_mask(self, tree_index: int, node_id: int) -> np.ndarray:
        """Rule nodes lying in K̂_α of the given tree."""
        measure = self.measures[tree_index]
        level = self.trees[tree_index].node_level[node_id]
        return measure.ancestors[:, level] == node_id

    def kube_mask(self, tree_index: int, node_id: int) -> np.ndarray:
        return self.measures[tree_index].located == node_id

    def restricted(self, depth: int) -> "TentSystem":
        """Same rule, every tree truncated to the given depth."""
        return TentSystem([tree.truncated(depth) for tree in self.trees], self.rule)

    def describe(self) -> dict:
        return {"trees": len(self.trees), "depth": self.depth, "tents": self.collection.n_sets}

    # -- operators at arbitrary points ---------------------------------------

    def membership_at(self, points) -> sparse.csr_matrix:
        """Tent membership rows (points × tents) for points off the rule."""
        coords = np.atleast_2d(as_coords(points))
        rows, cols = [], []
        column_of = {label: k for k, label in enumerate(self.labels)}
        for index, tree in enumerate(self.trees):
            table = tree.ancestor_table(tree.locate(coords))
            for i, row in enumerate(table):
                for node in row[row >= 0]:
                    k = column_of.get((index, int(node)))
                    if k is not None:
                        rows.append(i)
                        cols.append(k)
        shape = (coords.shape[0], self.collection.n_sets)
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=shape)

    def sparse_apply_at(self, values, points) -> np.ndarray:
        """Λ_𝒯 f at arbitrary points, f given by its values on the rule nodes."""
        return self.membership_at(points) @ self.collection.averages(values)

    def maximal_at(self, values, points, weights=None) -> np.ndarray:
        averages = self.collection.averages(np.abs(values), weights)
        return row_max(self.membership_at(points), averages)

