"""
Sparse collections over a discrete measure space and the operators built on
them: averages, Λ_𝒮, the collection maximal function, Sawyer testing
constants and the seeded test-function bank used for empirical norms.

A collection is a 0/1 membership matrix (points × sets) in CSR form together
with the point masses; majors are a second membership matrix.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from src.errors import DomainError, StarvationError

logger = logging.getLogger(__name__)

BANK_SIZE = 20


@dataclass(frozen=True)
class SparsityAudit:
    worst_ratio: float  # max ν(Q)/ν(E_Q)
    max_overlap: int  # largest number of majors sharing a point
    tau: float
    groups: int

    @property
    def certified(self) -> bool:
        return self.worst_ratio <= self.tau * (1.0 + 1e-12) and self.max_overlap <= self.groups


class SparseCollection:
    """
    Sets of a finite measure space with their major subsets. Majors are
    pairwise disjoint inside each of `groups` sub-families (one per tree for
    unions of tree families); `tau` is the certified sparsity constant.
    """

    def __init__(
        self,
        membership,
        point_masses,
        majors=None,
        labels: Optional[Sequence] = None,
        tau: Optional[float] = None,
        groups: int = 1,
        parents: Optional[np.ndarray] = None,
    ):
        self.membership = sparse.csr_matrix(membership, dtype=float)
        self.point_masses = np.asarray(point_masses, dtype=float)
        n_points, n_sets = self.membership.shape
        if self.point_masses.shape != (n_points,):
            raise DomainError("one mass per point is required")

        self.set_masses = np.asarray(self.membership.T @ self.point_masses).ravel()
        if np.any(self.set_masses <= 0.0):
            raise StarvationError(f"{int(np.sum(self.set_masses <= 0.0))} set(s) carry no mass")

        self.majors = self.membership if majors is None else sparse.csr_matrix(majors, dtype=float)
        self.major_masses = np.asarray(self.majors.T @ self.point_masses).ravel()
        self.labels = tuple(labels) if labels is not None else tuple(range(n_sets))
        self.groups = groups
        self.parents = None if parents is None else np.asarray(parents, dtype=int)
        with np.errstate(divide="ignore"):
            measured = float(np.max(self.set_masses / self.major_masses)) if n_sets else 1.0
        self.tau = measured if tau is None else float(tau)
        self._columns = self.membership.tocsc()

    @property
    def n_points(self) -> int:
        return self.membership.shape[0]

    @property
    def n_sets(self) -> int:
        return self.membership.shape[1]

    def points_of(self, k: int) -> np.ndarray:
        cols = self._columns
        return cols.indices[cols.indptr[k]:cols.indptr[k + 1]]

    def indicator(self, k: int) -> np.ndarray:
        out = np.zeros(self.n_points)
        out[self.points_of(k)] = 1.0
        return out

    # -- averages ------------------------------------------------------------

    def integrals(self, values) -> np.ndarray:
        """∫_Q f for every set Q."""
        values = np.asarray(values)
        return self.membership.T @ (self.point_masses * values)

    def averages(self, values, weights=None) -> np.ndarray:
        """⟨f⟩_Q, or ⟨f⟩^σ_Q = ∫_Q fσ / σ(Q) when weights σ are given."""
        if weights is None:
            return self.integrals(values) / self.set_masses
        weights = np.asarray(weights, dtype=float)
        return self.integrals(np.asarray(values) * weights) / self.integrals(weights)

    def apply(self, values) -> np.ndarray:
        """Λ_𝒮 f = Σ_Q ⟨f⟩_Q 1_Q at every point."""
        return self.membership @ self.averages(values)

    def maximal(self, values, weights=None) -> np.ndarray:
        """max over sets Q ∋ x of ⟨|f|⟩_Q (or ⟨|f|⟩^σ_Q); 0 at points no set contains."""
        averages = self.averages(np.abs(values), weights)
        return row_max(self.membership, averages)

    def kernel_matrix(self) -> np.ndarray:
        """Dense K with Λ_𝒮 f = K @ (masses · f): K_ij = Σ_{Q ∋ i, j} 1/ν(Q)."""
        scaled = self.membership @ sparse.diags(1.0 / self.set_masses)
        return np.asarray((scaled @ self.membership.T).todense())

    # -- structure -----------------------------------------------------------

    def subfamily(self, indices) -> "SparseCollection":
        indices = np.asarray(indices, dtype=int)
        parents = None
        if self.parents is not None:
            position = np.full(self.n_sets, -1, dtype=int)
            position[indices] = np.arange(indices.size)
            parents = self._nearest_kept_parent(indices, position)
        return SparseCollection(
            self.membership[:, indices],
            self.point_masses,
            self.majors[:, indices],
            [self.labels[i] for i in indices],
            groups=self.groups,
            parents=parents,
        )

    def _nearest_kept_parent(self, indices, position) -> np.ndarray:
        out = np.full(indices.size, -1, dtype=int)
        for slot, k in enumerate(indices):
            parent = self.parents[k]
            while parent >= 0 and position[parent] < 0:
                parent = self.parents[parent]
            out[slot] = position[parent] if parent >= 0 else -1
        return out

    def children(self) -> list:
        if self.parents is None:
            raise DomainError("collection carries no parent structure")
        kids = [[] for _ in range(self.n_sets)]
        for k, parent in enumerate(self.parents):
            if parent >= 0:
                kids[parent].append(k)
        return kids

    def audit(self) -> SparsityAudit:
        overlap = np.asarray(self.majors.sum(axis=1)).ravel()
        with np.errstate(divide="ignore"):
            worst = float(np.max(self.set_masses / self.major_masses)) if self.n_sets else 1.0
        return SparsityAudit(worst, int(overlap.max(initial=0)), self.tau, self.groups)

    @classmethod
    def union(cls, collections: Sequence["SparseCollection"]) -> "SparseCollection":
        """Finite union; majors stay disjoint within each member family."""
        first = collections[0]
        offsets = np.cumsum([0] + [c.n_sets for c in collections])
        parents = None
        if all(c.parents is not None for c in collections):
            parents = np.concatenate([
                np.where(c.parents >= 0, c.parents + off, -1) for c, off in zip(collections, offsets)
            ])
        return cls(
            sparse.hstack([c.membership for c in collections]),
            first.point_masses,
            sparse.hstack([c.majors for c in collections]),
            [label for c in collections for label in c.labels],
            tau=sum(c.groups for c in collections) * max(c.tau for c in collections),
            groups=sum(c.groups for c in collections),
            parents=parents,
        )

    # -- testing constants ---------------------------------------------------

    def local_apply(self, k: int, values) -> np.ndarray:
        """1_Q Λ_𝒮(1_Q f) at the points of Q (in points_of(k) order)."""
        rows = self.points_of(k)
        local = self.membership[rows]
        integrals = local.T @ (self.point_masses[rows] * np.asarray(values)[rows])
        return local @ (integrals / self.set_masses)

    def local_maximal(self, k: int, values) -> np.ndarray:
        """M(f 1_Q) at the points of Q: max over sets R ∋ x of ∫_{R∩Q} |f| / ν(R)."""
        rows = self.points_of(k)
        local = self.membership[rows]
        integrals = local.T @ (self.point_masses[rows] * np.abs(np.asarray(values)[rows]))
        return row_max(local, integrals / self.set_masses)

    def testing_constants(self, w, sigma, p: float = 2.0) -> "TestingConstants":
        """
        𝔗 = sup_Q ‖1_Q Λ(1_Q σ)‖^p_{L^p(w)} / σ(Q) and
        𝔗' = sup_Q ‖1_Q Λ(1_Q w)‖^{p'}_{L^{p'}(σ)} / w(Q).
        """
        w = np.asarray(w, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        q = p / (p - 1.0)
        sigma_mass = self.integrals(sigma)
        w_mass = self.integrals(w)
        forward = np.empty(self.n_sets)
        backward = np.empty(self.n_sets)
        for k in range(self.n_sets):
            rows = self.points_of(k)
            m = self.point_masses[rows]
            forward[k] = np.sum(m * w[rows] * self.local_apply(k, sigma) ** p) / sigma_mass[k]
            backward[k] = np.sum(m * sigma[rows] * self.local_apply(k, w) ** q) / w_mass[k]
        return TestingConstants(
            float(forward.max()), float(backward.max()),
            int(forward.argmax()), int(backward.argmax()), forward, backward,
        )


@dataclass(frozen=True, eq=False)
class TestingConstants:
    forward: float
    backward: float
    forward_set: int
    backward_set: int
    per_set_forward: np.ndarray
    per_set_backward: np.ndarray

    __test__ = False

    def combined(self, p: float = 2.0) -> float:
        q = p / (p - 1.0)
        return self.forward ** (1.0 / p) + self.backward ** (1.0 / q)


def row_max(membership: sparse.csr_matrix, values: np.ndarray) -> np.ndarray:
    """Per row, the max of `values` over the row's columns (0 for empty rows)."""
    indptr = membership.indptr
    out = np.zeros(membership.shape[0])
    nonempty = np.flatnonzero(np.diff(indptr) > 0)
    if nonempty.size:
        data = values[membership.indices]
        out[nonempty] = np.maximum.reduceat(data, indptr[nonempty])
    return out


def sparse_apply(collection: SparseCollection, values) -> np.ndarray:
    return collection.apply(values)


def maximal_function(collection: SparseCollection, values, weights=None) -> np.ndarray:
    return collection.maximal(values, weights)


def lp_norm(values, masses, p: float, weights=None) -> float:
    weights = 1.0 if weights is None else np.asarray(weights)
    return float(np.sum(masses * weights * np.abs(values) ** p) ** (1.0 / p))


def build_test_bank(
    collection: SparseCollection,
    seed: int,
    size: int = BANK_SIZE,
    extra: Optional[Sequence[np.ndarray]] = None,
) -> list:
    """
    Seeded nonnegative test functions: indicators of random sets, random step
    functions constant on majors, then any caller-supplied functions.
    """
    rng = np.random.default_rng(seed)
    extra = list(extra or [])
    room = max(0, size - len(extra))
    bank = []
    for k in rng.choice(collection.n_sets, size=(room + 1) // 2, replace=True):
        bank.append(collection.indicator(int(k)))
    steps = room - len(bank)
    owner = np.asarray(collection.majors.argmax(axis=1)).ravel()
    covered = np.asarray(collection.majors.sum(axis=1)).ravel() > 0
    for _ in range(steps):
        levels = rng.uniform(0.0, 1.0, size=collection.n_sets) ** 2
        f = np.zeros(collection.n_points)
        f[covered] = levels[owner[covered]]
        f[~covered] = rng.uniform(0.0, 1.0)
        bank.append(f + 1e-3)
    return bank + extra


def weighted_maximal_norm(
    collection: SparseCollection,
    sigma,
    p: float = 2.0,
    bank: Optional[Sequence[np.ndarray]] = None,
    seed: int = 0,
) -> float:
    """Empirical ‖M^σ‖_{L^p(σ)}: max over the bank of ‖M^σ f‖/‖f‖ in L^p(σ)."""
    sigma = np.asarray(sigma, dtype=float)
    bank = build_test_bank(collection, seed) if bank is None else bank
    masses = collection.point_masses
    worst = 0.0
    for f in bank:
        base = lp_norm(f, masses, p, sigma)
        if base == 0.0:
            continue
        worst = max(worst, lp_norm(collection.maximal(f, sigma), masses, p, sigma) / base)
    return worst
