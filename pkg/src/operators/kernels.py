"""
Quadrature evaluation of the Bergman projection P, the maximal projection P⁺
and dense kernel matrices for P, P⁺ and Λ over a rule.
"""
import logging
from enum import Enum
from typing import Optional

import numpy as np

from config import settings
from src.errors import DomainError
from src.geometry.ball import as_coords, check_in_ball, inner
from src.geometry.quadrature import QuadratureRule
from src.tree.tents import TentSystem

logger = logging.getLogger(__name__)


class KernelKind(str, Enum):
    PROJECTION = "P"
    MAXIMAL = "P+"
    SPARSE = "Lambda"


def kernel_gap(z, rule: QuadratureRule) -> np.ndarray:
    """1 − ⟨z_i, ζ_j⟩ for evaluation points z_i (rows) and rule nodes ζ_j."""
    z = np.atleast_2d(check_in_ball(as_coords(z)))
    if z.shape[1] != rule.d:
        raise DomainError(f"point dimension {z.shape[1]} does not match the rule dimension {rule.d}")
    return 1.0 - inner(z[:, None, :], rule.nodes[None, :, :])


def _warn_near_singular(gap: np.ndarray):
    close = int(np.count_nonzero(np.abs(gap) < settings.NEAR_SINGULAR))
    if close:
        logger.warning("%d kernel entries with |1 - <z, zeta>| below %.1e", close, settings.NEAR_SINGULAR)


def bergman_kernel(z, rule: QuadratureRule) -> np.ndarray:
    """(1 − ⟨z, ζ⟩)^{−(d+1)} for every (z, ζ) pair."""
    gap = kernel_gap(z, rule)
    _warn_near_singular(gap)
    return gap ** (-(rule.d + 1))


def maximal_kernel(z, rule: QuadratureRule) -> np.ndarray:
    gap = kernel_gap(z, rule)
    _warn_near_singular(gap)
    return np.abs(gap) ** (-(rule.d + 1))


def _single(values: np.ndarray, z):
    return values[0] if np.ndim(as_coords(z)) == 1 else values


def bergman_projection(f, z, rule: QuadratureRule):
    """Pf(z) = Σ_j m_j f(ζ_j)(1 − ⟨z, ζ_j⟩)^{−(d+1)}; one value per row of z."""
    values = bergman_kernel(z, rule) @ (rule.masses * rule.evaluate(f))
    return _single(values, z)


def maximal_projection(f, z, rule: QuadratureRule):
    """P⁺f(z) = Σ_j m_j |f(ζ_j)| |1 − ⟨z, ζ_j⟩|^{−(d+1)}."""
    values = maximal_kernel(z, rule) @ (rule.masses * np.abs(rule.evaluate(f)))
    return _single(values, z)


def kernel_matrix(kind: KernelKind, rule: QuadratureRule, system: Optional[TentSystem] = None) -> np.ndarray:
    """
    Dense K on the rule nodes with (Tf)(ζ_i) = Σ_j K_ij m_j f(ζ_j). The sparse
    kernel needs a tent system built on the same rule.
    """
    kind = KernelKind(kind)
    if kind is KernelKind.PROJECTION:
        return bergman_kernel(rule.nodes, rule)
    if kind is KernelKind.MAXIMAL:
        return maximal_kernel(rule.nodes, rule)
    if system is None:
        raise DomainError("the sparse kernel needs a tent system")
    if system.rule is not rule:
        raise DomainError("the tent system was built on a different rule")
    return system.collection.kernel_matrix()
