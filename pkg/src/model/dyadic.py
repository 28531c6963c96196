"""
Exact dyadic model on [0, 1): the 2^D finest cells, every dyadic interval of
generations 0..D in heap order (root 0, children 2k+1 and 2k+2), step
weights constant per cell, and the sparse-operator identities evaluated with
no quadrature error.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from src.errors import DomainError
from src.operators.norms import dense_norm, power_iteration, weighted_matrix
from src.operators.sparse import SparseCollection, TestingConstants, lp_norm
from src.operators.stopping import StoppingFamily, audit_stopping_family, stopping_family
from src.orlicz.luxembourg import grouped_luxembourg
from src.orlicz.young import YoungFunction, young_bp_check

logger = logging.getLogger(__name__)

MODEL_TAG = "dyadic1d"
DEFAULT_DEPTH = 10
SAWYER_BRACKET = (1.0 / 8.0, 8.0)


class DyadicGrid:
    def __init__(self, depth: int = DEFAULT_DEPTH):
        if depth < 0:
            raise DomainError(f"grid depth must be nonnegative, got {depth}")
        self.depth = depth
        self.n_cells = 2 ** depth
        self.n_intervals = 2 ** (depth + 1) - 1
        self.cell_mass = 1.0 / self.n_cells
        self._full = None

    @staticmethod
    def generation(k: int) -> int:
        return int(k + 1).bit_length() - 1

    def position(self, k: int) -> int:
        return k - (2 ** self.generation(k) - 1)

    def index(self, generation: int, position: int) -> int:
        return 2 ** generation - 1 + position

    def cell_range(self, k: int):
        g = self.generation(k)
        width = 2 ** (self.depth - g)
        start = self.position(k) * width
        return start, start + width

    def interval(self, k: int):
        start, stop = self.cell_range(k)
        return start * self.cell_mass, stop * self.cell_mass

    def length(self, k: int) -> float:
        return 2.0 ** (-self.generation(k))

    @staticmethod
    def parent(k: int) -> int:
        return (k - 1) // 2 if k > 0 else -1

    def children(self, k: int):
        if self.generation(k) == self.depth:
            return ()
        return (2 * k + 1, 2 * k + 2)

    def contains(self, outer: int, inner: int) -> bool:
        while inner > outer:
            inner = self.parent(inner)
        return inner == outer

    def ancestors_of_cell(self, cell: int) -> np.ndarray:
        """Heap indices of the intervals containing a cell, root first."""
        return np.array([self.index(g, cell >> (self.depth - g)) for g in range(self.depth + 1)])

    def leaf(self, cell: int) -> int:
        return self.index(self.depth, cell)

    def label(self, k: int) -> str:
        return f"{self.generation(k)}:{self.position(k)}"

    def family(self, indices: Optional[Sequence[int]] = None) -> SparseCollection:
        """
        The intervals `indices` (all intervals when omitted) as a collection over
        the cells. The major of Q is Q minus its maximal selected descendants;
        parents are the nearest selected ancestors.
        """
        if indices is None:
            if self._full is None:
                self._full = self._build(np.arange(self.n_intervals))
            return self._full
        indices = np.unique(np.asarray(indices, dtype=int))
        if indices.size == 0 or indices.min() < 0 or indices.max() >= self.n_intervals:
            raise DomainError("interval indices must be a nonempty subset of the grid")
        return self._build(indices)

    def _build(self, indices: np.ndarray) -> SparseCollection:
        column = np.full(self.n_intervals, -1, dtype=int)
        column[indices] = np.arange(indices.size)

        cells = np.arange(self.n_cells)
        rows, cols = [], []
        owner = np.full(self.n_cells, -1, dtype=int)
        for g in range(self.depth + 1):
            ancestors = 2 ** g - 1 + (cells >> (self.depth - g))
            selected = column[ancestors] >= 0
            rows.append(cells[selected])
            cols.append(column[ancestors[selected]])
            owner[selected] = column[ancestors[selected]]
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        shape = (self.n_cells, indices.size)
        membership = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=shape)
        covered = owner >= 0
        majors = sparse.csr_matrix((np.ones(int(covered.sum())), (cells[covered], owner[covered])), shape=shape)

        parents = np.full(indices.size, -1, dtype=int)
        for slot, k in enumerate(indices):
            up = self.parent(int(k))
            while up >= 0 and column[up] < 0:
                up = self.parent(up)
            parents[slot] = column[up] if up >= 0 else -1
        return SparseCollection(
            membership, np.full(self.n_cells, self.cell_mass), majors,
            labels=[int(k) for k in indices], parents=parents,
        )

    def column_of(self, collection: SparseCollection, k: int) -> int:
        return collection.labels.index(k)


@dataclass(frozen=True, eq=False)
class StepWeight:
    """A positive function constant on each of the 2^D finest cells."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        n = values.size
        if values.ndim != 1 or n == 0 or n & (n - 1):
            raise DomainError("a step weight needs 2^D cell values")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise DomainError("step weights must be strictly positive and finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def depth(self) -> int:
        return self.values.size.bit_length() - 1

    @classmethod
    def constant(cls, grid: DyadicGrid, value: float = 1.0) -> "StepWeight":
        return cls(np.full(grid.n_cells, float(value)))

    @classmethod
    def random(cls, grid: DyadicGrid, seed: int, spread: int = 2) -> "StepWeight":
        """Log-uniform cell values in [2^{−spread}, 2^{spread}]."""
        rng = np.random.default_rng(seed)
        return cls(2.0 ** rng.uniform(-spread, spread, size=grid.n_cells))

    def scaled(self, factor: float) -> "StepWeight":
        return StepWeight(self.values * factor)

    def dual(self, p: float) -> "StepWeight":
        return StepWeight(self.values ** (1.0 - p / (p - 1.0)))

    def inverse(self) -> "StepWeight":
        return StepWeight(1.0 / self.values)

    def refined(self, depth: int) -> "StepWeight":
        """The same function on the finer grid of the given depth."""
        if depth < self.depth:
            raise DomainError(f"cannot refine a depth-{self.depth} weight to depth {depth}")
        return StepWeight(np.repeat(self.values, 2 ** (depth - self.depth)))


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, StepWeight) else np.asarray(x, dtype=float)


def _check_grid(grid: DyadicGrid, *weights):
    for w in weights:
        if _values(w).size != grid.n_cells:
            raise DomainError(f"expected {grid.n_cells} cell values, got {_values(w).size}")


# -- averages ----------------------------------------------------------------

def model_average(w, k: int, grid: DyadicGrid) -> float:
    """Cell-weighted mean of w over interval k."""
    _check_grid(grid, w)
    start, stop = grid.cell_range(k)
    return float(np.mean(_values(w)[start:stop]))


def model_average_recursive(w, k: int, grid: DyadicGrid) -> float:
    """Mean of the two children's averages, down to the cells."""
    kids = grid.children(k)
    if not kids:
        start, _ = grid.cell_range(k)
        return float(_values(w)[start])
    return 0.5 * (model_average_recursive(w, kids[0], grid) + model_average_recursive(w, kids[1], grid))


def model_mass(w, k: int, grid: DyadicGrid) -> float:
    """w(I) = ⟨w⟩_I |I|."""
    start, stop = grid.cell_range(k)
    return float(np.sum(_values(w)[start:stop]) * grid.cell_mass)


# -- families ----------------------------------------------------------------

def chain_family(grid: DyadicGrid, cell: int = 0) -> SparseCollection:
    """Every interval containing `cell`; ½-sparse, each major is the sibling half."""
    return grid.family(grid.ancestors_of_cell(cell))


def random_sparse_family(grid: DyadicGrid, seed: int, keep: float = 0.5) -> SparseCollection:
    """
    Seeded ½-sparse family: from every selected interval, at most two of its
    four grandchildren are selected, each with probability `keep`.
    """
    rng = np.random.default_rng(seed)
    selected = [0]
    frontier = [0]
    while frontier:
        k = frontier.pop()
        if grid.generation(k) + 2 > grid.depth:
            continue
        grandchildren = [g for c in grid.children(k) for g in grid.children(c)]
        chosen = [g for g in rng.permutation(grandchildren) if rng.uniform() < keep][:2]
        selected.extend(int(g) for g in chosen)
        frontier.extend(int(g) for g in chosen)
    return grid.family(selected)


def sigma_tau(collection: SparseCollection, sigma) -> float:
    """max σ(Q)/σ(E_Q); infinite when some major carries no σ-mass."""
    weighted = collection.point_masses * _values(sigma)
    major = collection.majors.T @ weighted
    total = collection.membership.T @ weighted
    with np.errstate(divide="ignore"):
        return float(np.max(total / major))


def corona_family(f, sigma, grid: DyadicGrid, root: int = 0) -> SparseCollection:
    """The stopping intervals of (f, σ) under `root` as a collection."""
    full = grid.family()
    stopping = stopping_family(_values(f), _values(sigma), grid.column_of(full, root), full)
    return grid.family([full.labels[m] for m in stopping.members])


# -- characteristics ---------------------------------------------------------

def model_joint_bp(w, sigma, p: float, grid: DyadicGrid) -> float:
    """max over all dyadic intervals of ⟨w⟩⟨σ⟩^{p−1}."""
    full = grid.family()
    return float(np.max(full.averages(_values(w)) * full.averages(_values(sigma)) ** (p - 1.0)))


def model_b_infty(sigma, grid: DyadicGrid) -> float:
    """max over intervals Q of ∫_Q M(σ1_Q)/σ(Q), M the dyadic maximal function."""
    full = grid.family()
    sv = _values(sigma)
    mass = full.integrals(sv)
    best = 0.0
    for k in range(full.n_sets):
        rows = full.points_of(k)
        local = full.local_maximal(k, sv)
        best = max(best, float(np.sum(full.point_masses[rows] * local) / mass[k]))
    return best


def model_bump_values(w, sigma, phi: YoungFunction, psi: YoungFunction, collection: SparseCollection) -> np.ndarray:
    wv, sv = _values(w), _values(sigma)
    masses = collection.point_masses
    w_lux = grouped_luxembourg(np.sqrt(wv), collection.membership, masses, phi)
    s_lux = grouped_luxembourg(np.sqrt(sv), collection.membership, masses, psi)
    return (collection.averages(wv) / w_lux) * (collection.averages(sv) / s_lux)


# -- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class ModelRatio:
    name: str
    lhs: float
    rhs: float
    bound: Optional[float] = None
    depth: int = 0
    extra: dict = field(default_factory=dict)
    bracket: Optional[Tuple[float, float]] = None

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    @property
    def within_bound(self) -> bool:
        return self.bound is None or self.ratio <= self.bound * (1.0 + 1e-12)

    @property
    def in_bracket(self) -> bool:
        if self.bracket is None:
            return True
        low, high = self.bracket
        return low <= self.ratio <= high

    def to_row(self) -> dict:
        return {
            "model": MODEL_TAG, "name": self.name, "depth": self.depth,
            "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "bound": self.bound,
            "in_bracket": self.in_bracket,
            **{k: v for k, v in sorted(self.extra.items())},
        }


def model_lemma_aux1(f, sigma, collection: SparseCollection, p: float = 2.0) -> ModelRatio:
    """
    (Σ_F (⟨f⟩^σ_F)^p σ(F))^{1/p} against ‖f‖_{L^p(σ)}; bounded by τ_σ^{1/p}·p'
    through the σ-dyadic maximal function.
    """
    fv, sv = np.abs(_values(f)), _values(sigma)
    tau = sigma_tau(collection, sv)
    if not np.isfinite(tau):
        raise DomainError("the family is not sparse with respect to σ")
    sigma_mass = collection.integrals(sv)
    lhs = float(np.sum(collection.averages(fv, sv) ** p * sigma_mass) ** (1.0 / p))
    rhs = lp_norm(fv, collection.point_masses, p, sv)
    q = p / (p - 1.0)
    return ModelRatio("lemma_aux1", lhs, rhs, tau ** (1.0 / p) * q, _depth(collection), {"tau_sigma": tau, "p": p})


def model_lemma_aux2(
    w,
    top: int,
    phi: YoungFunction,
    p: float,
    collection: SparseCollection,
    grid: DyadicGrid,
    strict: bool = True,
) -> ModelRatio:
    """
    Σ_{Q ⊆ G} ⟨w^{1/p}⟩_{Φ,Q}^p |Q| against w(G). With `strict` a Young
    function outside the 𝓑_p class is rejected.
    """
    check = young_bp_check(phi, p)
    if strict:
        check.require(phi.label(), p)
    wv = _values(w)
    inside = [j for j, k in enumerate(collection.labels) if grid.contains(top, k)]
    if not inside:
        raise DomainError(f"no interval of the family lies inside {grid.label(top)}")
    sub = collection.subfamily(inside)
    lux = grouped_luxembourg(wv ** (1.0 / p), sub.membership, sub.point_masses, phi)
    lhs = float(np.sum(lux ** p * sub.set_masses))
    rhs = model_mass(wv, top, grid)
    return ModelRatio("lemma_aux2", lhs, rhs, None, grid.depth, {"phi": phi.label(), "p": p, "bp_converges": check.converges})


def model_exact_norm(w, sigma, collection: SparseCollection) -> float:
    """‖Λ(σ·)‖_{L²(σ)→L²(w)} from the singular values of the dense model matrix."""
    matrix = weighted_matrix(collection.kernel_matrix(), collection.point_masses, _values(w), _values(sigma))
    return dense_norm(matrix)


def model_power_norm(w, sigma, collection: SparseCollection) -> float:
    matrix = weighted_matrix(collection.kernel_matrix(), collection.point_masses, _values(w), _values(sigma))
    value, _ = power_iteration(matrix)
    return value


def model_sawyer_constants(w, sigma, collection: SparseCollection, p: float = 2.0) -> TestingConstants:
    return collection.testing_constants(_values(w), _values(sigma), p)


def model_sawyer_equivalence(w, sigma, collection: SparseCollection) -> ModelRatio:
    """Exact norm against 𝔗^{1/2} + 𝔗'^{1/2} (p = 2)."""
    constants = model_sawyer_constants(w, sigma, collection, 2.0)
    return ModelRatio(
        "sawyer", model_exact_norm(w, sigma, collection), constants.combined(2.0), None, _depth(collection),
        {"forward": constants.forward, "backward": constants.backward},
        SAWYER_BRACKET,
    )


def model_prop_bump(
    w,
    sigma,
    phi: YoungFunction,
    psi: YoungFunction,
    collection: SparseCollection,
    strict: bool = True,
) -> ModelRatio:
    """Exact ‖Λ(σ·)‖_{L²(σ)→L²(w)} against the joint bump over the family."""
    if strict:
        young_bp_check(phi, 2.0).require(phi.label(), 2.0)
        young_bp_check(psi, 2.0).require(psi.label(), 2.0)
    bump = float(np.max(model_bump_values(w, sigma, phi, psi, collection)))
    norm = model_exact_norm(w, sigma, collection)
    return ModelRatio("prop_bump", norm, bump, None, _depth(collection), {"phi": phi.label(), "psi": psi.label()})


def model_prop42(w, sigma, collection: SparseCollection, grid: DyadicGrid) -> ModelRatio:
    """max_Q ‖1_Q Λ(σ1_Q)‖²_{L²(w)}/σ(Q) against [σ, w]_{B₂}[σ]_{B_∞} over all dyadic intervals."""
    constants = model_sawyer_constants(w, sigma, collection, 2.0)
    budget = model_joint_bp(sigma, w, 2.0, grid) * model_b_infty(sigma, grid)
    return ModelRatio("prop42", constants.forward, budget, None, grid.depth)


def model_bilinear_form(f, g, w, sigma, collection: SparseCollection):
    """
    ⟨Λ(fσ), gw⟩ computed directly and as Σ_Q ⟨f⟩^σ_Q⟨g⟩^w_Q⟨σ⟩_Q⟨w⟩_Q|Q|.
    Returns (direct, expanded).
    """
    fv, gv, wv, sv = (_values(x) for x in (f, g, w, sigma))
    masses = collection.point_masses
    direct = float(np.sum(masses * collection.apply(fv * sv) * gv * wv))
    expanded = float(np.sum(
        collection.averages(fv, sv) * collection.averages(gv, wv)
        * collection.averages(sv) * collection.averages(wv) * collection.set_masses
    ))
    return direct, expanded


@dataclass(frozen=True, eq=False)
class CoronaAudit:
    blocks: int
    partition_ok: bool
    nesting_failures: int
    f_average_failures: int
    g_average_failures: int

    @property
    def clean(self) -> bool:
        return self.partition_ok and not (self.nesting_failures or self.f_average_failures or self.g_average_failures)


@dataclass(frozen=True, eq=False)
class CoronaDecomposition:
    f_family: StoppingFamily
    g_family: StoppingFamily
    pairs: np.ndarray  # (set, π_ℱ, π_𝒢) for every set under the root
    audit: CoronaAudit


def model_corona_decomposition(f, g, w, sigma, collection: SparseCollection, root: int = 0) -> CoronaDecomposition:
    """
    Parallel stopping families ℱ for (f, σ) and 𝒢 for (g, w) under `root`
    (a collection column), the pairing π(Q) = (π_ℱ(Q), π_𝒢(Q)) and its audit.
    """
    fv, gv, wv, sv = (_values(x) for x in (f, g, w, sigma))
    f_family = stopping_family(fv, sv, root, collection)
    g_family = stopping_family(gv, wv, root, collection)

    under = np.flatnonzero(f_family.projection >= 0)
    pairs = np.column_stack([under, f_family.projection[under], g_family.projection[under]])
    blocks = {(int(a), int(b)) for _, a, b in pairs}
    partition_ok = bool(np.array_equal(under, np.flatnonzero(g_family.projection >= 0)))

    nesting = 0
    for a, b in blocks:
        if not (_is_ancestor(collection, a, b) or _is_ancestor(collection, b, a)):
            nesting += 1
    f_fail = int(np.count_nonzero(f_family.averages[under] > 2.0 * f_family.averages[pairs[:, 1]] * (1.0 + 1e-12)))
    g_fail = int(np.count_nonzero(g_family.averages[under] > 2.0 * g_family.averages[pairs[:, 2]] * (1.0 + 1e-12)))

    f_audit = audit_stopping_family(f_family, collection, sv)
    g_audit = audit_stopping_family(g_family, collection, wv)
    logger.debug("corona: %d blocks, stopping ratios %.3g / %.3g", len(blocks), f_audit.worst_ratio, g_audit.worst_ratio)
    audit = CoronaAudit(len(blocks), partition_ok, nesting, f_fail, g_fail)
    return CoronaDecomposition(f_family, g_family, pairs, audit)


def _is_ancestor(collection: SparseCollection, upper: int, lower: int) -> bool:
    while lower >= 0:
        if lower == upper:
            return True
        lower = collection.parents[lower]
    return False


def _depth(collection: SparseCollection) -> int:
    return collection.n_points.bit_length() - 1
