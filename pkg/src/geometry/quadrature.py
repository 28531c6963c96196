"""
Discretizations of the normalized volume measure ν on 𝔹^d.

Polar rules place one ring of nodes per radial cell, at the radius whose
square is the ν-mean of r² over the cell; ring masses are the exact ν-volumes
of the cells. Radial cells shrink geometrically toward the sphere with the
configured grading ratio (ratio 1 gives a uniform radial grid).
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from config import settings
from src.errors import DomainError, StarvationError
from src.geometry.ball import SUPPORTED_DIMENSIONS

logger = logging.getLogger(__name__)

MASS_TOL = 1e-12


class Scheme(str, Enum):
    POLAR_GRID = "polar-grid"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    masses: np.ndarray
    scheme: Scheme
    seed: Optional[int] = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=complex)
        masses = np.array(self.masses, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] not in SUPPORTED_DIMENSIONS:
            raise DomainError(f"nodes must have shape (n, d), got {nodes.shape}")
        if masses.shape != (nodes.shape[0],):
            raise DomainError("one mass per node is required")
        if np.any(masses <= 0.0):
            raise DomainError("quadrature masses must be positive")
        if abs(masses.sum() - 1.0) > MASS_TOL:
            raise DomainError(f"total mass {masses.sum():.17g} differs from 1")
        if np.any(np.linalg.norm(nodes, axis=1) >= 1.0):
            raise DomainError("quadrature nodes must lie strictly inside the ball")
        nodes.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "masses", masses)

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.nodes, axis=1)

    def evaluate(self, f) -> np.ndarray:
        """Values of f at the nodes; f may be a callable, an array of node values or a constant."""
        if callable(f):
            values = np.asarray(f(self.nodes))
        else:
            values = np.asarray(f)
        if values.ndim == 0:
            return np.full(self.size, values[()])
        if values.shape != (self.size,):
            raise DomainError(f"expected {self.size} node values, got shape {values.shape}")
        return values

    def mask(self, region) -> np.ndarray:
        if region is None:
            return np.ones(self.size, dtype=bool)
        if callable(region):
            return np.asarray(region(self.nodes), dtype=bool)
        return np.asarray(region, dtype=bool)

    def integrate(self, f, region=None) -> "Integral":
        return integrate(f, region, self)

    def describe(self) -> dict:
        return {"scheme": self.scheme.value, "size": self.size, "d": self.d, "seed": self.seed}


class Integral(NamedTuple):
    value: Union[float, complex]
    nodes: int

    @property
    def empty(self) -> bool:
        return self.nodes == 0


def integrate(f, region, rule: QuadratureRule) -> Integral:
    """Σ_i m_i f(ζ_i) 1_region(ζ_i); an empty region integrates to 0 with the empty flag set."""
    mask = rule.mask(region)
    count = int(np.count_nonzero(mask))
    if count == 0:
        return Integral(0.0, 0)
    values = rule.evaluate(f)
    total = np.sum(rule.masses[mask] * values[mask])
    return Integral(total.item(), count)


def average(f, region, rule: QuadratureRule) -> Union[float, complex]:
    """⟨f⟩_E = ∫_E f dν / ν(E)."""
    mask = rule.mask(region)
    mass = rule.masses[mask].sum()
    if not mass > 0.0:
        raise StarvationError("average over a set that captures no quadrature node")
    values = rule.evaluate(f)
    return (np.sum(rule.masses[mask] * values[mask]) / mass).item()


def radial_edges(size: int, grading: float) -> np.ndarray:
    """Radial cell edges 0 = r_0 < ... < r_size = 1 with widths ∝ grading^k."""
    if size < 1:
        raise DomainError("a polar rule needs at least one radial cell")
    if not 0.0 < grading <= 1.0:
        raise DomainError(f"grading ratio must lie in (0, 1], got {grading}")
    widths = grading ** np.arange(size, dtype=float)
    edges = np.concatenate(([0.0], np.cumsum(widths) / widths.sum()))
    edges[-1] = 1.0
    return edges


def ring_radii(edges: np.ndarray, d: int) -> np.ndarray:
    """Radius per cell whose square is the ν-mean of r² over the cell."""
    a, b = edges[:-1], edges[1:]
    k = 2 * d
    mean_r2 = (k / (k + 2.0)) * (b ** (k + 2) - a ** (k + 2)) / (b ** k - a ** k)
    return np.sqrt(mean_r2)


def sphere_grid(d: int, angular: int, rotation: float = 0.0) -> np.ndarray:
    """
    Equal-area grid of unit vectors in ℂ^d with unit weights.
    d = 1: `angular` points on the circle. d = 2: (cos η e^{iθ₁}, sin η e^{iθ₂})
    with sin²η on a midpoint grid and θ₁, θ₂ on `angular`-point grids.
    """
    theta = rotation + 2.0 * np.pi * (np.arange(angular) + 0.5) / angular
    if d == 1:
        return np.exp(1j * theta).reshape(-1, 1)
    n_s = max(2, angular // 4)
    s = (np.arange(n_s) + 0.5) / n_s
    cos_eta, sin_eta = np.sqrt(1.0 - s), np.sqrt(s)
    c, t1, t2 = np.meshgrid(np.arange(n_s), theta, theta + 0.5 * rotation, indexing="ij")
    first = cos_eta[c] * np.exp(1j * t1)
    second = sin_eta[c] * np.exp(1j * t2)
    return np.stack([first.ravel(), second.ravel()], axis=1)


def build_quadrature(
    d: int,
    scheme: Union[Scheme, str] = Scheme.POLAR_GRID,
    size: int = 64,
    seed: Optional[int] = None,
    grading: Optional[float] = None,
    angular: Optional[int] = None,
) -> QuadratureRule:
    """
    polar-grid: `size` radial cells × `angular` directions (default 2·size for d = 1,
    size for d = 2). monte-carlo: `size` uniform points with equal masses.
    """
    if d not in SUPPORTED_DIMENSIONS:
        raise DomainError(f"unsupported dimension d = {d}")
    scheme = Scheme(scheme)
    if size < 1:
        raise DomainError("quadrature size must be at least 1")

    if scheme is Scheme.MONTE_CARLO:
        rule = _monte_carlo(d, size, settings.SEED if seed is None else seed)
    else:
        grading = settings.GRADING if grading is None else grading
        if angular is None:
            angular = 2 * size if d == 1 else size
        rule = _polar_grid(d, size, angular, grading)

    logger.debug("built %s rule with %d nodes (d=%d)", scheme.value, rule.size, d)
    return rule


def _polar_grid(d: int, size: int, angular: int, grading: float) -> QuadratureRule:
    edges = radial_edges(size, grading)
    radii = ring_radii(edges, d)
    ring_mass = edges[1:] ** (2 * d) - edges[:-1] ** (2 * d)

    directions = sphere_grid(d, angular)
    n_dir = directions.shape[0]
    nodes = (radii[:, None, None] * directions[None, :, :]).reshape(-1, d)
    masses = np.repeat(ring_mass / n_dir, n_dir)
    return QuadratureRule(nodes, masses / masses.sum(), Scheme.POLAR_GRID)


def _monte_carlo(d: int, size: int, seed: int) -> QuadratureRule:
    rng = np.random.default_rng(seed)
    accepted = []
    count = 0
    while count < size:
        batch = rng.uniform(-1.0, 1.0, size=(2 * size + 16, 2 * d))
        batch = batch[np.sum(batch ** 2, axis=1) < 1.0]
        accepted.append(batch)
        count += batch.shape[0]
    real = np.concatenate(accepted)[:size]
    nodes = real[:, 0::2] + 1j * real[:, 1::2]
    return QuadratureRule(nodes, np.full(size, 1.0 / size), Scheme.MONTE_CARLO, seed)
