"""
The Bergman tree: layered sphere nets, kubes, centres, parent links and
dyadic tents, plus the shifted/rotated tree families.

Layer boundaries are b_0 = 0 and b_n = nR + shift (n ≥ 1). The root kube is
the Bergman ball B(0, b_1); a level-n kube is the set of ζ with
b_n ≤ β(0, ζ) < b_{n+1} whose direction falls in the Voronoi patch of its
net point on 𝕊_{b_n}. Points with β(0, ζ) ≥ b_{depth+1} are beyond the
horizon of the tree.
"""
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import List, Optional

import numpy as np
from scipy.spatial import cKDTree

from config import settings
from src.errors import DomainError, OutOfDepthError
from src.geometry.ball import SUPPORTED_DIMENSIONS, BallPoint, as_coords, check_in_ball
from src.tree.sphere_net import build_sphere_net

logger = logging.getLogger(__name__)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
# Bergman-nearest patch is searched among this many Euclidean-nearest directions (d = 2)
PATCH_CANDIDATES = 16
# clamped points are pulled this far (Bergman) inside the horizon
CLAMP_MARGIN = 1e-9


@dataclass(frozen=True)
class TreeParams:
    R: float
    delta: float
    depth: int
    d: int = 1

    def __post_init__(self):
        if not self.R > 0.0:
            raise DomainError(f"R must be positive, got {self.R}")
        if not self.delta > 0.0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if self.depth < 0:
            raise DomainError(f"depth must be nonnegative, got {self.depth}")
        if self.d not in SUPPORTED_DIMENSIONS:
            raise DomainError(f"unsupported dimension d = {self.d}")

    @classmethod
    def defaults(cls, d: int = 1) -> "TreeParams":
        return cls(d=d, **settings.TREE_DEFAULTS[d])

    def with_depth(self, depth: int) -> "TreeParams":
        return replace(self, depth=depth)

    def to_dict(self) -> dict:
        return {"R": self.R, "delta": self.delta, "depth": self.depth, "d": self.d}


@dataclass(frozen=True, eq=False)
class TreeNode:
    id: int
    level: int
    index: int  # 1-based within its level
    net_point: Optional[BallPoint]
    center: BallPoint
    parent: Optional[int]
    children: tuple

    @property
    def is_root(self) -> bool:
        return self.parent is None

    @property
    def label(self) -> str:
        return f"{self.level}:{self.index}"


class BergmanTree:
    """Immutable once built. Node ids are flat: root 0, then level 1, level 2, ..."""

    def __init__(
        self,
        params: TreeParams,
        directions: List[np.ndarray],
        parents: List[np.ndarray],
        shift: float = 0.0,
        rotation: float = 0.0,
    ):
        if len(directions) != params.depth or len(parents) != params.depth:
            raise DomainError("one net and one parent table per level 1..depth is required")
        self.params = params
        self.shift = float(shift)
        self.rotation = float(rotation)
        self._directions = [np.asarray(u, dtype=complex).reshape(-1, params.d) for u in directions]
        self._parents = [np.asarray(p, dtype=int) for p in parents]

        self.boundaries = np.array(
            [0.0] + [n * params.R + self.shift for n in range(1, params.depth + 2)]
        )
        sizes = [1] + [u.shape[0] for u in self._directions]
        self.offsets = np.concatenate(([0], np.cumsum(sizes)))
        self.n_nodes = int(self.offsets[-1])

        self.node_level = np.repeat(np.arange(params.depth + 1), sizes)
        self.node_parent = np.full(self.n_nodes, -1, dtype=int)
        for n, par in enumerate(self._parents, start=1):
            self.node_parent[self.offsets[n]:self.offsets[n + 1]] = self.offsets[n - 1] + par

        self._kd = [cKDTree(np.column_stack([u.real, u.imag])) for u in self._directions]

    # -- structure -----------------------------------------------------------

    @property
    def depth(self) -> int:
        return self.params.depth

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def horizon(self) -> float:
        """Bergman radius b_{depth+1} of the region the tree partitions."""
        return float(self.boundaries[-1])

    def level_size(self, level: int) -> int:
        return int(self.offsets[level + 1] - self.offsets[level])

    def directions(self, level: int) -> np.ndarray:
        if level < 1:
            raise DomainError("the root carries no net")
        return self._directions[level - 1]

    def net_points(self, level: int) -> np.ndarray:
        return math.tanh(self.boundaries[level]) * self.directions(level)

    @cached_property
    def centers(self) -> np.ndarray:
        centers = np.zeros((self.n_nodes, self.d), dtype=complex)
        for n in range(1, self.depth + 1):
            middle = 0.5 * (self.boundaries[n] + self.boundaries[n + 1])
            centers[self.offsets[n]:self.offsets[n + 1]] = math.tanh(middle) * self.directions(n)
        return centers

    @cached_property
    def children(self) -> List[np.ndarray]:
        order = np.argsort(self.node_parent, kind="stable")
        counts = np.bincount(self.node_parent[self.node_parent >= 0], minlength=self.n_nodes)
        starts = np.concatenate(([0], np.cumsum(counts)))
        # the root's parent (-1) sorts first
        order = order[1:]
        return [order[starts[i]:starts[i + 1]] for i in range(self.n_nodes)]

    @cached_property
    def ancestors(self) -> np.ndarray:
        """(n_nodes, depth + 1) table: ancestor at each level, -1 below the node's level."""
        table = np.full((self.n_nodes, self.depth + 1), -1, dtype=int)
        current = np.arange(self.n_nodes)
        for level in range(self.depth, -1, -1):
            alive = current >= 0
            hit = alive & (self.node_level[np.maximum(current, 0)] == level)
            table[hit, level] = current[hit]
            current = np.where(hit, self.node_parent[np.maximum(current, 0)], current)
        return table

    def node(self, node_id: int) -> TreeNode:
        level = int(self.node_level[node_id])
        parent = int(self.node_parent[node_id])
        net_point = None
        if level > 0:
            net_point = BallPoint(self.net_points(level)[node_id - self.offsets[level]])
        return TreeNode(
            id=int(node_id),
            level=level,
            index=int(node_id - self.offsets[level]) + 1,
            net_point=net_point,
            center=BallPoint(self.centers[node_id]),
            parent=None if parent < 0 else parent,
            children=tuple(int(c) for c in self.children[node_id]),
        )

    @property
    def root(self) -> TreeNode:
        return self.node(0)

    def level_nodes(self, level: int) -> List[TreeNode]:
        return [self.node(i) for i in range(self.offsets[level], self.offsets[level + 1])]

    def is_ancestor(self, ancestor: int, node: int) -> bool:
        level = self.node_level[ancestor]
        return bool(self.node_level[node] >= level and self.ancestors[node, level] == ancestor)

    def subtree(self, node_id: int) -> np.ndarray:
        """Ids of node_id and all its descendants."""
        level = self.node_level[node_id]
        return np.flatnonzero(self.ancestors[:, level] == node_id)

    # -- point location ------------------------------------------------------

    def assign_patch(self, level: int, directions: np.ndarray) -> np.ndarray:
        """
        0-based index of the patch Ω_j^level holding each unit direction: the
        net direction minimizing |1 − ρ²⟨u, v_j⟩|, ρ = tanh(b_level); ties go
        to the lower index.
        """
        u = np.asarray(directions, dtype=complex).reshape(-1, self.d)
        nets = self.directions(level)
        size = nets.shape[0]
        if u.shape[0] == 0:
            return np.zeros(0, dtype=int)
        k = min(size, 2 if self.d == 1 else PATCH_CANDIDATES)
        _, candidates = self._kd[level - 1].query(np.column_stack([u.real, u.imag]), k=k)
        candidates = np.sort(np.asarray(candidates, dtype=int).reshape(u.shape[0], k), axis=1)

        rho2 = math.tanh(self.boundaries[level]) ** 2
        gram = np.einsum("ik,ijk->ij", u, np.conj(nets[candidates]))
        score = np.abs(1.0 - rho2 * gram)
        return candidates[np.arange(u.shape[0]), np.argmin(score, axis=1)]

    def levels_of(self, points) -> np.ndarray:
        """Level n with b_n ≤ β(0, ζ) < b_{n+1}; depth + 1 beyond the horizon."""
        norms = np.linalg.norm(check_in_ball(points), axis=-1)
        beta = np.arctanh(norms)
        return np.searchsorted(self.boundaries[1:], beta, side="right")

    def locate(self, points, clamp: bool = False) -> np.ndarray:
        """Flat node id of the kube holding each point; -1 beyond the horizon unless clamped."""
        coords = np.atleast_2d(as_coords(points))
        levels = self.levels_of(coords)
        beyond = levels > self.depth
        if clamp and np.any(beyond):
            inside = math.tanh(self.horizon - CLAMP_MARGIN)
            coords = coords.copy()
            norms = np.linalg.norm(coords[beyond], axis=1, keepdims=True)
            coords[beyond] = inside * coords[beyond] / norms
            levels = np.minimum(levels, self.depth)
            beyond = np.zeros_like(beyond)

        ids = np.full(coords.shape[0], -1, dtype=int)
        ids[levels == 0] = 0
        norms = np.linalg.norm(coords, axis=1)
        for n in range(1, self.depth + 1):
            rows = np.flatnonzero(levels == n)
            if rows.size:
                patch = self.assign_patch(n, coords[rows] / norms[rows, None])
                ids[rows] = self.offsets[n] + patch
        return ids

    def locate_kube(self, zeta) -> TreeNode:
        node_id = int(self.locate(zeta)[0])
        if node_id < 0:
            raise OutOfDepthError(
                f"point at Bergman radius {float(np.arctanh(np.linalg.norm(as_coords(zeta)))):.6g} "
                f"is beyond the horizon {self.horizon:.6g}"
            )
        return self.node(node_id)

    def ancestor_table(self, ids) -> np.ndarray:
        """Ancestor rows for located ids; rows of -1 for points beyond the horizon."""
        ids = np.asarray(ids, dtype=int)
        table = self.ancestors[np.maximum(ids, 0)].copy()
        table[ids < 0] = -1
        return table

    def kube_contains(self, node: TreeNode, points) -> np.ndarray:
        return self.locate(points) == node.id

    def tent_contains(self, node: TreeNode, points) -> np.ndarray:
        """ζ ∈ K̂_α iff the kube holding ζ is α or a descendant of α."""
        table = self.ancestor_table(self.locate(points))
        return table[:, node.level] == node.id

    # -- derived trees and serialization -------------------------------------

    def truncated(self, depth: int) -> "BergmanTree":
        if not 0 <= depth <= self.depth:
            raise DomainError(f"cannot truncate a depth-{self.depth} tree to depth {depth}")
        return BergmanTree(
            self.params.with_depth(depth),
            self._directions[:depth],
            self._parents[:depth],
            self.shift,
            self.rotation,
        )

    def to_dict(self) -> dict:
        levels = []
        for n in range(1, self.depth + 1):
            start, stop = self.offsets[n], self.offsets[n + 1]
            levels.append({
                "level": n,
                "directions": _complex_rows(self.directions(n)),
                "net_points": _complex_rows(self.net_points(n)),
                "parents": [int(p) for p in self.node_parent[start:stop]],
                "centers": _complex_rows(self.centers[start:stop]),
            })
        return {
            "params": self.params.to_dict(),
            "shift": self.shift,
            "rotation": self.rotation,
            "boundaries": [float(b) for b in self.boundaries],
            "levels": levels,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BergmanTree":
        params = TreeParams(**doc["params"])
        directions, parents = [], []
        offsets = [0, 1]
        for entry in sorted(doc["levels"], key=lambda e: e["level"]):
            u = _rows_complex(entry["directions"], params.d)
            directions.append(u)
            parents.append(np.asarray(entry["parents"], dtype=int) - offsets[-2])
            offsets.append(offsets[-1] + u.shape[0])
        return cls(params, directions, parents, doc.get("shift", 0.0), doc.get("rotation", 0.0))

    def __repr__(self):
        sizes = [self.level_size(n) for n in range(self.depth + 1)]
        return f"BergmanTree(d={self.d}, R={self.params.R}, depth={self.depth}, sizes={sizes}, shift={self.shift:.4g})"


def _complex_rows(values: np.ndarray) -> list:
    return [[float(x) for pair in zip(row.real, row.imag) for x in pair] for row in values]


def _rows_complex(rows: list, d: int) -> np.ndarray:
    arr = np.asarray(rows, dtype=float).reshape(-1, 2 * d)
    return arr[:, 0::2] + 1j * arr[:, 1::2]


def build_tree(params: TreeParams, shift: float = 0.0, rotation: float = 0.0) -> BergmanTree:
    """Nets on 𝕊_{b_n} for n = 1..depth and parent links by patch assignment."""
    if not 0.0 <= shift < params.R:
        raise DomainError(f"layer shift must lie in [0, R), got {shift}")
    directions, parents = [], []
    for n in range(1, params.depth + 1):
        radius = n * params.R + shift
        u = build_sphere_net(radius, params.delta, params.d, rotation)
        if n == 1:
            parent = np.zeros(u.shape[0], dtype=int)
        else:
            partial = BergmanTree(params.with_depth(n - 1), directions, parents, shift, rotation)
            parent = partial.assign_patch(n - 1, u)
        directions.append(u)
        parents.append(parent)
        logger.info("tree level %d: %d nodes (radius %.3f)", n, u.shape[0], radius)
    return BergmanTree(params, directions, parents, shift, rotation)


def build_tree_family(params: TreeParams, count: int) -> List[BergmanTree]:
    """Tree k is built with layer shift kR/count and net rotation k times the golden angle."""
    if count < 1:
        raise DomainError("a tree family needs at least one tree")
    return [
        build_tree(params, shift=k * params.R / count, rotation=k * GOLDEN_ANGLE)
        for k in range(count)
    ]


def export_tree(tree: BergmanTree) -> dict:
    return tree.to_dict()


def import_tree(doc: dict) -> BergmanTree:
    return BergmanTree.from_dict(doc)


def locate_kube(tree: BergmanTree, zeta) -> TreeNode:
    return tree.locate_kube(zeta)


def tent_contains(tree: BergmanTree, node: TreeNode, zeta):
    mask = tree.tent_contains(node, zeta)
    if isinstance(zeta, BallPoint):
        return bool(mask[0])
    return mask
