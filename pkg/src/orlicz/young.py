"""
Young functions of the power and power-log families, and the integrability
test ∫_1^∞ Φ(t) t^{-p} dt/t that decides the 𝓑_p class.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from src.errors import BumpConditionError, ConfigError, DomainError

logger = logging.getLogger(__name__)

BP_UPPER = 1e8
VALIDATION_GRID = np.concatenate(([0.0], np.logspace(-6.0, 6.0, 241)))


class YoungFamily(str, Enum):
    POWER = "power"
    POWER_LOG = "power-log"


@dataclass(frozen=True)
class YoungFunction:
    """Φ(t) = t^r (power) or Φ(t) = t^p·log(e + t)^a (power-log)."""

    family: YoungFamily
    r: float = 2.0
    p: float = 2.0
    a: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", YoungFamily(self.family))
        if self.family is YoungFamily.POWER and not self.r > 1.0:
            raise DomainError(f"power Young functions need r > 1, got {self.r}")
        if self.family is YoungFamily.POWER_LOG and not self.p >= 1.0:
            raise DomainError(f"power-log Young functions need p ≥ 1, got {self.p}")
        self.validate()

    @classmethod
    def power(cls, r: float) -> "YoungFunction":
        return cls(YoungFamily.POWER, r=float(r))

    @classmethod
    def power_log(cls, p: float, a: float) -> "YoungFunction":
        return cls(YoungFamily.POWER_LOG, p=float(p), a=float(a))

    @classmethod
    def from_spec(cls, spec: dict) -> "YoungFunction":
        try:
            family = YoungFamily(spec["family"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad Young function spec {spec!r}") from exc
        if family is YoungFamily.POWER:
            return cls.power(spec["r"])
        return cls.power_log(spec["p"], spec.get("a", 0.0))

    @property
    def growth(self) -> float:
        """Leading polynomial exponent."""
        return self.r if self.family is YoungFamily.POWER else self.p

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family is YoungFamily.POWER:
            return t ** self.r
        return t ** self.p * np.log(math.e + t) ** self.a

    def inverse(self, y):
        """Φ⁻¹(y) for y ≥ 0."""
        if self.family is YoungFamily.POWER:
            return np.asarray(y, dtype=float) ** (1.0 / self.r)
        values = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.array([self._invert_one(v) for v in values])
        return out if np.ndim(y) else float(out[0])

    def _invert_one(self, y: float) -> float:
        if y == 0.0:
            return 0.0
        hi = 1.0
        while float(self(hi)) < y:
            hi *= 2.0
        return optimize.brentq(lambda t: float(self(t)) - y, 0.0, hi, xtol=1e-300, rtol=1e-15)

    def validate(self):
        """Φ(0) = 0, strictly increasing and convex on a grid, Φ(t)/t growing at 10³ → 10⁶."""
        values = self(VALIDATION_GRID)
        if values[0] != 0.0:
            raise DomainError(f"{self.label()}: Φ(0) ≠ 0")
        if np.any(np.diff(values) <= 0.0):
            raise DomainError(f"{self.label()} is not strictly increasing")
        slopes = np.diff(values) / np.diff(VALIDATION_GRID)
        if np.any(np.diff(slopes) < -1e-9 * np.abs(slopes[1:])):
            raise DomainError(f"{self.label()} is not convex")
        if not float(self(1e6)) / 1e6 > float(self(1e3)) / 1e3:
            raise DomainError(f"{self.label()} is not superlinear")

    def spec(self) -> dict:
        if self.family is YoungFamily.POWER:
            return {"family": self.family.value, "r": self.r}
        return {"family": self.family.value, "p": self.p, "a": self.a}

    def label(self) -> str:
        if self.family is YoungFamily.POWER:
            return f"t^{self.r:g}"
        return f"t^{self.p:g}log(e+t)^{self.a:g}"


@dataclass(frozen=True)
class BumpCheck:
    converges: bool
    value: Optional[float]  # ∫_1^∞ when convergent
    numeric: float  # ∫_1^T by quadrature
    tail: Optional[float]  # analytic ∫_T^∞ when convergent
    reason: str

    def require(self, name: str = "Φ", p: float = 2.0):
        if not self.converges:
            raise BumpConditionError(f"{name} is outside the B_{p:g} class: {self.reason}")
        return self


def young_bp_check(phi: YoungFunction, p: float, upper: float = BP_UPPER) -> BumpCheck:
    """
    ∫_1^T Φ(t) t^{-p-1} dt by quadrature in u = log t, classified by the
    family's tail exponent; the analytic tail past T is added when convergent.
    """
    if not p > 1.0:
        raise DomainError(f"exponent p must exceed 1, got {p}")
    top = math.log(upper)
    numeric, _ = integrate.quad(lambda u: float(phi(math.exp(u))) * math.exp(-p * u), 0.0, top, limit=400)

    if phi.family is YoungFamily.POWER:
        if phi.r < p:
            tail = upper ** (phi.r - p) / (p - phi.r)
            return BumpCheck(True, numeric + tail, numeric, tail, f"tail exponent {phi.r - p:g} < 0")
        return BumpCheck(False, None, numeric, None, f"power {phi.r:g} ≥ p = {p:g}")

    q, a = phi.p, phi.a
    if q < p:
        tail = top ** a * upper ** (q - p) / (p - q)
        return BumpCheck(True, numeric + tail, numeric, tail, f"tail exponent {q - p:g} < 0")
    if q == p and a < -1.0:
        tail = top ** (a + 1.0) / (-a - 1.0)
        return BumpCheck(True, numeric + tail, numeric, tail, f"log exponent {a:g} < -1 at the critical power")
    reason = f"power {q:g} > p" if q > p else f"log exponent {a:g} ≥ -1 at the critical power"
    return BumpCheck(False, None, numeric, None, reason)
