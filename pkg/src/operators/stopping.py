"""
Stopping families on a nested collection: starting from a root set, select
the maximal descendants whose σ-weighted average of f more than doubles the
average on the current stopping set, and repeat below them.
"""
import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from src.errors import DomainError
from src.operators.sparse import SparseCollection

logger = logging.getLogger(__name__)

GROWTH = 2.0


@dataclass(frozen=True, eq=False)
class StoppingAudit:
    worst_ratio: float  # max σ(∪ next-generation members under F) / σ(F)
    doubling_failures: int
    maximality_failures: int

    @property
    def sparse(self) -> bool:
        return self.worst_ratio <= 0.5 and self.doubling_failures == 0 and self.maximality_failures == 0


@dataclass(frozen=True, eq=False)
class StoppingFamily:
    root: int
    members: List[int]  # collection set indices, root first
    generation: dict  # member -> generation
    stopping_parent: dict  # member -> enclosing member (root maps to -1)
    projection: np.ndarray  # set index -> minimal enclosing member, -1 outside the root
    averages: np.ndarray  # ⟨f⟩^σ_Q for every set of the collection

    def __contains__(self, k: int) -> bool:
        return k in self.generation

    def children_of(self, member: int) -> List[int]:
        return [m for m in self.members if self.stopping_parent[m] == member]

    def block(self, member: int) -> np.ndarray:
        """Sets whose minimal enclosing member is `member`."""
        return np.flatnonzero(self.projection == member)


def stopping_family(f, sigma, root: int, collection: SparseCollection) -> StoppingFamily:
    """
    ℱ₀ = {root}; a set S below a member F joins as a child of F when
    ⟨f⟩^σ_S > 2⟨f⟩^σ_F and no set strictly between F and S did. `f` and `sigma`
    are values at the collection's points.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0.0):
        raise DomainError("stopping families need a nonnegative function")
    if not 0 <= root < collection.n_sets:
        raise DomainError(f"root {root} is not a set of the collection")
    kids = collection.children()
    averages = collection.averages(f, sigma)

    projection = np.full(collection.n_sets, -1, dtype=int)
    generation = {root: 0}
    stopping_parent = {root: -1}
    members = [root]
    projection[root] = root

    stack = [(child, root) for child in reversed(kids[root])]
    while stack:
        k, member = stack.pop()
        if averages[k] > GROWTH * averages[member]:
            generation[k] = generation[member] + 1
            stopping_parent[k] = member
            members.append(k)
            member = k
        projection[k] = member
        stack.extend((child, member) for child in reversed(kids[k]))

    logger.debug("stopping family under set %d: %d members, %d generations",
                 root, len(members), 1 + max(generation.values()))
    return StoppingFamily(root, members, generation, stopping_parent, projection, averages)


def audit_stopping_family(family: StoppingFamily, collection: SparseCollection, sigma) -> StoppingAudit:
    """Doubling, maximality and ½-sparseness of the family with respect to σ."""
    sigma = np.asarray(sigma, dtype=float)
    parents = collection.parents
    averages = family.averages
    doubling = maximality = 0
    for member in family.members[1:]:
        top = family.stopping_parent[member]
        if not averages[member] > GROWTH * averages[top]:
            doubling += 1
        # no set strictly between top and member may pass the test
        k = parents[member]
        while k != top and k >= 0:
            if averages[k] > GROWTH * averages[top]:
                maximality += 1
                break
            k = parents[k]

    weighted = collection.point_masses * sigma
    worst = 0.0
    for member in family.members:
        children = family.children_of(member)
        if not children:
            continue
        covered = np.zeros(collection.n_points, dtype=bool)
        for child in children:
            covered[collection.points_of(child)] = True
        ratio = float(np.sum(weighted[covered]) / np.sum(weighted[collection.points_of(member)]))
        worst = max(worst, ratio)
    return StoppingAudit(worst, doubling, maximality)
