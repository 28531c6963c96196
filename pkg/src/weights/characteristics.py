"""
Weight characteristics as suprema over finite tent families: joint dyadic
B_p, classical 𝓑_p over a Carleson apex grid, B_∞, the joint Orlicz bump and
the σ-sparseness of the tent family.

Every report carries the value at the working truncation and at a coarser
one (depth − REFINE_STEP, or the apex grid REFINE_STEP levels shallower);
growth by a factor ≥ 2 between the two marks the value as likely infinite.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from config import settings
from src.errors import DomainError, StarvationError
from src.geometry.ball import SUPPORTED_DIMENSIONS, inner
from src.geometry.quadrature import QuadratureRule, average as rule_average, sphere_grid
from src.orlicz.luxembourg import luxembourg_averages
from src.orlicz.young import YoungFunction
from src.tree.tents import TentSystem
from src.weights.weight import Weight, node_values

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 2.0


@dataclass(frozen=True)
class CharacteristicReport:
    name: str
    value: float
    extremal_set: object
    truncation: dict
    trend: Tuple[float, float]  # (coarse, fine)
    diverged: bool
    inputs: dict = field(default_factory=dict)

    def to_row(self) -> dict:
        return {
            "characteristic": self.name,
            "value": self.value,
            "extremal_set": str(self.extremal_set),
            "coarse": self.trend[0],
            "fine": self.trend[1],
            "diverged": self.diverged,
            **{f"truncation_{k}": v for k, v in sorted(self.truncation.items())},
            **{k: v for k, v in sorted(self.inputs.items())},
        }


def growth_flag(coarse: float, fine: float) -> bool:
    return coarse > 0.0 and fine / coarse >= DIVERGENCE_FACTOR


def average(weight: Weight, region, rule: QuadratureRule) -> float:
    """⟨w⟩_E over the rule nodes of E."""
    return float(np.real(rule_average(weight, region, rule)))


def _refined(
    name: str,
    compute: Callable[[TentSystem], Tuple[float, object]],
    system: TentSystem,
    inputs: dict,
) -> CharacteristicReport:
    value, extremal = compute(system)
    coarse_depth = max(0, system.depth - settings.REFINE_STEP)
    if coarse_depth == system.depth:
        coarse = value
    else:
        coarse, _ = compute(system.restricted(coarse_depth))
    truncation = {"depth": system.depth, "coarse_depth": coarse_depth, "trees": len(system.trees)}
    report = CharacteristicReport(name, value, extremal, truncation, (coarse, value), growth_flag(coarse, value), inputs)
    if report.diverged:
        logger.warning("%s grows from %.6g to %.6g across refinement", name, coarse, value)
    return report


# -- joint dyadic B_p --------------------------------------------------------

def joint_bp_products(system: TentSystem, w_values, sigma_values, p: float) -> np.ndarray:
    """⟨w⟩_{K̂}·⟨σ⟩_{K̂}^{p−1} for every tent of the system."""
    collection = system.collection
    return collection.averages(w_values) * collection.averages(sigma_values) ** (p - 1.0)


def _joint_bp_at(w: Weight, sigma: Weight, p: float):
    def compute(system: TentSystem):
        products = joint_bp_products(system, node_values(w, system.rule), node_values(sigma, system.rule), p)
        k = int(np.argmax(products))
        return float(products[k]), system.labels[k]
    return compute


def joint_bp_dyadic(w: Weight, sigma: Weight, p: float, trees, rule: Optional[QuadratureRule] = None) -> CharacteristicReport:
    """[w, σ]_{B_p} = max over dyadic tents of ⟨w⟩⟨σ⟩^{p−1}."""
    _check_p(p)
    system = TentSystem.ensure(trees, rule)
    inputs = {"w": w.label(), "sigma": sigma.label(), "p": p}
    return _refined("joint_bp_dyadic", _joint_bp_at(w, sigma, p), system, inputs)


# -- classical 𝓑_p over Carleson tents ---------------------------------------

@dataclass(frozen=True)
class ApexGrid:
    """Apex radii 1 − 2^{−k}, k = 1..levels, with direction counts doubling per level."""

    levels: int = settings.APEX_LEVELS
    angular: int = 8
    d: int = 1

    def __post_init__(self):
        if self.levels < 0 or self.angular < 1 or self.d not in SUPPORTED_DIMENSIONS:
            raise DomainError(f"invalid apex grid {self}")

    def apexes(self) -> np.ndarray:
        rows = []
        for k in range(1, self.levels + 1):
            radius = 1.0 - 2.0 ** (-k)
            if self.d == 1:
                count = self.angular * 2 ** k
                directions = np.exp(2j * np.pi * np.arange(count) / count).reshape(-1, 1)
            else:
                directions = sphere_grid(2, min(self.angular * 2 ** (k // 2), 32))
            rows.append(radius * directions)
        if not rows:
            return np.zeros((0, self.d), dtype=complex)
        return np.concatenate(rows)

    def coarse(self, step: int) -> "ApexGrid":
        return ApexGrid(max(0, self.levels - step), self.angular, self.d)

    def describe(self) -> dict:
        return {"apex_levels": self.levels, "apex_angular": self.angular}


def carleson_membership(apexes: np.ndarray, rule: QuadratureRule, include_origin: bool = True):
    """
    Membership (rule nodes × tents) of T_z for each apex, T₀ first when
    requested. Candidates come from a KD-tree ball of radius √(2(1 − |z|))
    around z/|z|, which contains T_z.
    """
    embed = np.column_stack([rule.nodes.real, rule.nodes.imag])
    kd = cKDTree(embed)
    rows, cols = [], []
    column = 0
    if include_origin:
        rows.append(np.arange(rule.size))
        cols.append(np.zeros(rule.size, dtype=int))
        column = 1
    kept = []
    for apex in apexes:
        norm = float(np.linalg.norm(apex))
        direction = apex / norm
        height = 1.0 - norm
        target = np.concatenate([direction.real, direction.imag])
        near = np.asarray(kd.query_ball_point(target, math.sqrt(2.0 * height) + 1e-12), dtype=int)
        if near.size == 0:
            continue
        inside = near[np.abs(1.0 - inner(rule.nodes[near], direction)) <= height + 1e-12]
        if inside.size == 0:
            continue
        rows.append(inside)
        cols.append(np.full(inside.size, column))
        kept.append(apex)
        column += 1
    dropped = len(apexes) - len(kept)
    if dropped:
        logger.warning("%d Carleson tents capture no rule node and are skipped", dropped)
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
    membership = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(rule.size, column))
    return membership, kept


def _carleson_products(membership, rule: QuadratureRule, w_values, sigma_values, p: float) -> np.ndarray:
    mass = membership.T @ rule.masses
    return (membership.T @ (rule.masses * w_values) / mass) * (membership.T @ (rule.masses * sigma_values) / mass) ** (p - 1.0)


def bp_classical(
    w: Weight,
    sigma: Weight,
    p: float,
    apex_grid: ApexGrid,
    rule: QuadratureRule,
) -> CharacteristicReport:
    """[w, σ]_{𝓑_p} = max over T₀ and the grid's Carleson tents of ⟨w⟩⟨σ⟩^{p−1}."""
    _check_p(p)
    wv, sv = node_values(w, rule), node_values(sigma, rule)

    def compute(grid: ApexGrid):
        membership, kept = carleson_membership(grid.apexes(), rule)
        products = _carleson_products(membership, rule, wv, sv, p)
        k = int(np.argmax(products))
        extremal = "T0" if k == 0 else _apex_label(kept[k - 1])
        return float(products[k]), extremal

    value, extremal = compute(apex_grid)
    coarse_grid = apex_grid.coarse(settings.REFINE_STEP)
    coarse, _ = compute(coarse_grid)
    truncation = {**apex_grid.describe(), "coarse_apex_levels": coarse_grid.levels}
    inputs = {"w": w.label(), "sigma": sigma.label(), "p": p}
    return CharacteristicReport("bp_classical", value, extremal, truncation, (coarse, value), growth_flag(coarse, value), inputs)


def _apex_label(apex: np.ndarray) -> str:
    return "T(" + ",".join(f"{c.real:.6g}{c.imag:+.6g}j" for c in apex) + ")"


# -- B_∞ ---------------------------------------------------------------------

def b_infty_values(system: TentSystem, sigma_values) -> np.ndarray:
    """(1/σ(K̂))·∫_{K̂} M(σ1_{K̂}) dν for every tent, M over all tents of the system."""
    collection = system.collection
    sigma_mass = collection.integrals(sigma_values)
    out = np.empty(collection.n_sets)
    for k in range(collection.n_sets):
        rows = collection.points_of(k)
        local = collection.local_maximal(k, sigma_values)
        out[k] = np.sum(collection.point_masses[rows] * local) / sigma_mass[k]
    return out


def b_infty(sigma: Weight, trees, rule: Optional[QuadratureRule] = None) -> CharacteristicReport:
    system = TentSystem.ensure(trees, rule)

    def compute(sys: TentSystem):
        values = b_infty_values(sys, node_values(sigma, sys.rule))
        k = int(np.argmax(values))
        return float(values[k]), sys.labels[k]

    return _refined("b_infty", compute, system, {"sigma": sigma.label()})


# -- joint Orlicz bump -------------------------------------------------------

def orlicz_bump_values(system: TentSystem, w_values, sigma_values, phi: YoungFunction, psi: YoungFunction) -> np.ndarray:
    collection = system.collection
    w_part = collection.averages(w_values) / luxembourg_averages(collection, np.sqrt(w_values), phi)
    s_part = collection.averages(sigma_values) / luxembourg_averages(collection, np.sqrt(sigma_values), psi)
    return w_part * s_part


def orlicz_bump(
    w: Weight,
    sigma: Weight,
    phi: YoungFunction,
    psi: YoungFunction,
    trees,
    rule: Optional[QuadratureRule] = None,
) -> CharacteristicReport:
    """[w, σ]_{Φ,Ψ} = max over tents of (⟨w⟩/⟨w^{1/2}⟩_Φ)(⟨σ⟩/⟨σ^{1/2}⟩_Ψ)."""
    system = TentSystem.ensure(trees, rule)

    def compute(sys: TentSystem):
        values = orlicz_bump_values(sys, node_values(w, sys.rule), node_values(sigma, sys.rule), phi, psi)
        k = int(np.argmax(values))
        return float(values[k]), sys.labels[k]

    inputs = {"w": w.label(), "sigma": sigma.label(), "phi": phi.label(), "psi": psi.label()}
    return _refined("orlicz_bump", compute, system, inputs)


# -- σ-sparseness ------------------------------------------------------------

@dataclass(frozen=True)
class SigmaSparsity:
    measured: float  # max σ(K̂)/σ(K) over tents with a populated kube
    budget: float  # τ̂^p·[σ]_{B_p}
    tau_hat: float
    bp: float
    extremal_set: object

    @property
    def within_budget(self) -> bool:
        return self.measured <= self.budget * (1.0 + 1e-12)


def sigma_sparsity(sigma: Weight, trees, rule: Optional[QuadratureRule] = None, p: float = 2.0) -> SigmaSparsity:
    """The tent family is (τ̂^p[σ]_{B_p})⁻¹-sparse with respect to σ dν."""
    _check_p(p)
    system = TentSystem.ensure(trees, rule)
    collection = system.collection
    sv = node_values(sigma, system.rule)

    tent_sigma = collection.integrals(sv)
    kube_sigma = collection.majors.T @ (collection.point_masses * sv)
    populated = collection.major_masses > 0.0
    if not np.any(populated):
        raise StarvationError("no kube captured a rule node")
    ratios = np.full(collection.n_sets, -np.inf)
    ratios[populated] = tent_sigma[populated] / kube_sigma[populated]
    tau_hat = float(np.max(collection.set_masses[populated] / collection.major_masses[populated]))

    products = joint_bp_products(system, sv, node_values(sigma.dual(p), system.rule), p)
    k = int(np.argmax(ratios))
    return SigmaSparsity(float(ratios[k]), tau_hat ** p * float(products.max()), tau_hat, float(products.max()), system.labels[k])


def _check_p(p: float):
    if not p > 1.0:
        raise DomainError(f"exponent p must exceed 1, got {p}")
