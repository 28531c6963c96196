"""
Two-weight operator norms ‖T(σ·)‖_{L²(σ)→L²(w)} of discretized kernels, by
power iteration on A*A with a dense cross-check on small rules, and the
closed-form norm of the projection between power-radial weights.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, special

from config import settings
from src.errors import ConvergenceError, DomainError
from src.geometry.quadrature import QuadratureRule
from src.operators.kernels import KernelKind, kernel_matrix
from src.tree.tents import TentSystem
from src.weights.weight import Weight, node_values

logger = logging.getLogger(__name__)

MODAL_TERMS = 20000


@dataclass(frozen=True)
class NormEstimate:
    """`value` is the dense singular value whenever one was computed, the power estimate otherwise."""

    value: float
    iterations: int
    dense: Optional[float]
    power: Optional[float] = None  # None when the iteration did not converge

    @property
    def discrepancy(self) -> Optional[float]:
        if self.dense is None or self.power is None or self.dense == 0.0:
            return None
        return abs(self.power - self.dense) / self.dense


def weighted_matrix(kernel: np.ndarray, masses, w_values, sigma_values) -> np.ndarray:
    """A_ij = (m_i w_i)^{1/2} K_ij (m_j σ_j)^{1/2}; ‖A‖₂ is the L²(σ) → L²(w) norm of f ↦ T(σf)."""
    left = np.sqrt(np.asarray(masses) * np.asarray(w_values))
    right = np.sqrt(np.asarray(masses) * np.asarray(sigma_values))
    return left[:, None] * kernel * right[None, :]


def power_iteration(
    matrix: np.ndarray,
    tol: Optional[float] = None,
    maxiter: Optional[int] = None,
    seed: Optional[int] = None,
):
    """Largest singular value of `matrix` from the iteration x ← A*Ax/‖A*Ax‖. Returns (value, iterations)."""
    tol = settings.POWER_TOL if tol is None else tol
    maxiter = settings.POWER_MAXITER if maxiter is None else maxiter
    rng = np.random.default_rng(settings.SEED if seed is None else seed)

    x = rng.standard_normal(matrix.shape[1]) + 0.0j
    x /= np.linalg.norm(x)
    estimate = 0.0
    for iteration in range(1, maxiter + 1):
        y = matrix.conj().T @ (matrix @ x)
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0, iteration
        x = y / norm
        previous, estimate = estimate, math.sqrt(norm)
        logger.debug("power iteration %d: %.12g", iteration, estimate)
        if abs(estimate - previous) <= tol * estimate:
            return estimate, iteration
    raise ConvergenceError(f"power iteration did not reach relative {tol:g} in {maxiter} iterations")


def dense_norm(matrix: np.ndarray) -> float:
    return float(linalg.svdvals(matrix)[0])


def estimate_operator_norm(
    kind: KernelKind,
    sigma: Weight,
    w: Weight,
    rule: QuadratureRule,
    system: Optional[TentSystem] = None,
    dense_check: bool = True,
) -> NormEstimate:
    kernel = kernel_matrix(kind, rule, system)
    matrix = weighted_matrix(kernel, rule.masses, node_values(w, rule), node_values(sigma, rule))
    use_dense = dense_check and rule.size <= settings.DENSE_LIMIT
    try:
        power, iterations = power_iteration(matrix)
    except ConvergenceError as exc:
        if not use_dense:
            raise
        logger.warning("%s; using the dense decomposition on %d nodes", exc, rule.size)
        power, iterations = None, settings.POWER_MAXITER

    dense = None
    value = power
    if use_dense:
        dense = value = dense_norm(matrix)
        if power is not None and abs(power - dense) > settings.POWER_TOL * max(dense, 1e-300):
            logger.warning("power iteration %.12g and dense %.12g disagree; reporting dense", power, dense)
    logger.info("norm of %s on %d nodes: %.8g after %d iterations", KernelKind(kind).value, rule.size, value, iterations)
    return NormEstimate(value, iterations, dense, power)


def operator_norm(
    kind: KernelKind,
    sigma: Weight,
    w: Weight,
    rule: QuadratureRule,
    system: Optional[TentSystem] = None,
) -> float:
    """Largest singular value of the discretized f ↦ T(σf) from L²(σ) to L²(w)."""
    return estimate_operator_norm(kind, sigma, w, rule, system).value


def modal_projection_norm(w: Weight, sigma: Weight, d: int = 1, terms: int = MODAL_TERMS) -> float:
    """
    ‖P(σ·)‖_{L²(σ)→L²(w)} for w = s_w(1 − |z|²)^a, σ = s_σ(1 − |z|²)^b:
    the squared norm is s_w s_σ · sup_k (k+d)² B(k+d, a+1) B(k+d, b+1).
    Infinite when a + b < 0.
    """
    if not (w.is_power_radial and sigma.is_power_radial):
        raise DomainError("the modal norm needs power-radial weights")
    a, b = w.radial_exponent, sigma.radial_exponent
    if a <= -1.0 or b <= -1.0:
        raise DomainError(f"power-radial exponents must exceed -1, got {a:g} and {b:g}")
    if a + b < 0.0:
        return math.inf
    k = np.arange(terms, dtype=float) + d
    logs = 2.0 * np.log(k) + special.betaln(k, a + 1.0) + special.betaln(k, b + 1.0)
    best = float(np.max(logs))
    if a + b == 0.0:
        # the terms approach Γ(a+1)Γ(b+1)
        best = max(best, float(special.gammaln(a + 1.0) + special.gammaln(b + 1.0)))
    return math.sqrt(w.scale * sigma.scale * math.exp(best))
