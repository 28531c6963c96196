"""
Points of the complex unit ball, the ball involution, the Bergman metric and
Carleson tents. All functions are vectorized: a point set is a complex array
of shape (n, d); a single point is a BallPoint or a 1-D array of length d.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.errors import DomainError

logger = logging.getLogger(__name__)

SUPPORTED_DIMENSIONS = (1, 2)
TENT_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class BallPoint:
    """A point of 𝔹^d ⊂ ℂ^d, d ∈ {1, 2}."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.atleast_1d(np.asarray(self.coords, dtype=complex)).copy()
        if coords.ndim != 1 or coords.size not in SUPPORTED_DIMENSIONS:
            raise DomainError(f"BallPoint needs 1 or 2 complex coordinates, got shape {coords.shape}")
        if not np.linalg.norm(coords) < 1.0:
            raise DomainError(f"|z| = {np.linalg.norm(coords):.17g} is not inside the open ball")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def d(self) -> int:
        return self.coords.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    @classmethod
    def polar(cls, radius: float, angle: float = 0.0, d: int = 1) -> "BallPoint":
        """The point radius·e^{i·angle}·e_1."""
        coords = np.zeros(d, dtype=complex)
        coords[0] = radius * np.exp(1j * angle)
        return cls(coords)

    def __repr__(self):
        return f"BallPoint({np.array2string(self.coords, precision=6)})"


def as_coords(z) -> np.ndarray:
    if isinstance(z, BallPoint):
        return z.coords
    return np.asarray(z, dtype=complex)


def points_from_complex(values, d: int = 1) -> np.ndarray:
    """Stack complex scalars (d = 1) or coordinate rows into an (n, d) array."""
    arr = np.asarray(values, dtype=complex)
    if d == 1 and arr.ndim == 1:
        return arr.reshape(-1, 1)
    return arr.reshape(-1, d)


def inner(a, b) -> np.ndarray:
    """Hermitian product ⟨a, b⟩ = Σ a_k conj(b_k) over the last axis."""
    return np.sum(as_coords(a) * np.conj(as_coords(b)), axis=-1)


def check_in_ball(points) -> np.ndarray:
    arr = as_coords(points)
    norms = np.linalg.norm(arr, axis=-1)
    if np.any(~(norms < 1.0)):
        raise DomainError(f"{int(np.count_nonzero(~(norms < 1.0)))} point(s) outside the open ball")
    return arr


def involution(z, w):
    """
    φ_z(w): the involution of the ball exchanging z and the origin.
    φ_0 is taken to be −id, the continuous limit of the formula.
    Returns a BallPoint when w is a BallPoint, an array otherwise.
    """
    zc = check_in_ball(z)
    wc = check_in_ball(w)

    zz = np.sum(np.abs(zc) ** 2, axis=-1)[..., None]
    wz = inner(wc, zc)[..., None]
    safe = np.where(zz > 0.0, zz, 1.0)
    proj = np.where(zz > 0.0, wz / safe, 0.0) * zc
    s = np.sqrt(1.0 - zz)
    image = (zc - proj - s * (wc - proj)) / (1.0 - wz)

    if isinstance(w, BallPoint):
        return BallPoint(image)
    return image


def bergman_distance(z, w) -> np.ndarray:
    """β(z, w) = ½ log((1 + |φ_z(w)|) / (1 − |φ_z(w)|)), elementwise over broadcast points."""
    zc = check_in_ball(z)
    wc = check_in_ball(w)

    den = np.abs(1.0 - inner(wc, zc)) ** 2
    one_minus = (1.0 - np.sum(np.abs(zc) ** 2, axis=-1)) * (1.0 - np.sum(np.abs(wc) ** 2, axis=-1)) / den
    rho2 = 1.0 - one_minus

    # the closed form cancels near the diagonal; use the explicit image there
    near = rho2 < 0.25
    if np.any(near):
        image = involution(zc, wc)
        rho2 = np.where(near, np.sum(np.abs(image) ** 2, axis=-1), rho2)
    rho = np.sqrt(np.clip(rho2, 0.0, None))

    far = np.log1p(rho) - 0.5 * np.log(np.where(near, 1.0, one_minus))
    beta = np.where(near, np.arctanh(np.minimum(rho, 0.5)), far)
    if np.ndim(beta) == 0:
        return float(beta)
    return beta


def euclidean_radius(bergman_radius):
    """Euclidean radius of the Bergman sphere 𝕊_r centred at the origin."""
    return np.tanh(bergman_radius)


def radial_projection(points, bergman_radius: float) -> np.ndarray:
    """π_r: radial projection of nonzero points onto 𝕊_r."""
    arr = as_coords(points)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise DomainError("radial projection is undefined at the origin")
    return np.tanh(bergman_radius) * arr / norms


@dataclass(frozen=True, eq=False)
class CarlesonTent:
    """
    T_z = {ζ : |1 − ⟨ζ, z/|z|⟩| ≤ 1 − |z|}; apex None is the origin, T_0 = 𝔹^d.
    """

    apex: Optional[BallPoint] = None

    def __post_init__(self):
        if self.apex is not None and self.apex.norm == 0.0:
            object.__setattr__(self, "apex", None)

    @classmethod
    def origin(cls) -> "CarlesonTent":
        return cls(None)

    @property
    def is_origin(self) -> bool:
        return self.apex is None

    @property
    def height(self) -> float:
        """1 − |z|; the whole ball for the origin tent."""
        return 1.0 if self.apex is None else 1.0 - self.apex.norm

    @property
    def direction(self) -> Optional[np.ndarray]:
        if self.apex is None:
            return None
        return self.apex.coords / self.apex.norm

    def contains(self, zeta) -> np.ndarray:
        pts = check_in_ball(zeta)
        if self.apex is None:
            return np.ones(pts.shape[:-1], dtype=bool)
        return np.abs(1.0 - inner(pts, self.direction)) <= self.height + TENT_SLACK

    def __repr__(self):
        return "CarlesonTent(ORIGIN)" if self.apex is None else f"CarlesonTent({self.apex!r})"


def carleson_tent_contains(tent: CarlesonTent, zeta):
    mask = tent.contains(zeta)
    if isinstance(zeta, BallPoint):
        return bool(mask)
    return mask
