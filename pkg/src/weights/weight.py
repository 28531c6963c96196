"""
Weights on the ball. A weight is scale · base(z)^power where the base is one
of four kinds; duals and rescalings only touch scale and power, so every
derived weight stays exactly evaluable.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from src.errors import ConfigError, DomainError
from src.geometry.ball import check_in_ball, inner
from src.tree.bergman_tree import BergmanTree

logger = logging.getLogger(__name__)


class WeightKind(str, Enum):
    POWER_RADIAL = "power-radial"
    PRODUCT = "product"
    CELL_TABULATED = "cell-tabulated"
    EXPLICIT = "explicit"


def _one_minus_norm2(z: np.ndarray) -> np.ndarray:
    return 1.0 - np.sum(np.abs(z) ** 2, axis=-1)


EXPRESSIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "unit": lambda z: np.ones(z.shape[0]),
    "log-radial": lambda z: 1.0 + np.log(1.0 / _one_minus_norm2(z)),
    "angular": lambda z: 2.0 + np.real(z[:, 0]) / np.maximum(np.abs(z[:, 0]), 1e-300),
    "bump": lambda z: 1.0 + 4.0 * np.exp(-8.0 * np.abs(z[:, 0] - 0.5) ** 2),
}


def register_expression(name: str, func: Callable[[np.ndarray], np.ndarray]):
    EXPRESSIONS[name] = func


@dataclass(frozen=True, eq=False)
class Weight:
    kind: WeightKind
    alpha: float = 0.0
    factors: Tuple[Tuple[float, Tuple[complex, ...]], ...] = ()
    tree: Optional[BergmanTree] = field(default=None, repr=False)
    table: Optional[np.ndarray] = field(default=None, repr=False)
    expression: Optional[str] = None
    scale: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", WeightKind(self.kind))
        if not self.scale > 0.0:
            raise DomainError(f"weight scale must be positive, got {self.scale}")
        if self.kind is WeightKind.CELL_TABULATED:
            if self.tree is None or self.table is None:
                raise DomainError("a tabulated weight needs a tree and a value per node")
            table = np.asarray(self.table, dtype=float)
            if table.shape != (self.tree.n_nodes,) or np.any(table <= 0.0):
                raise DomainError("tabulated weights need one positive value per tree node")
            table.setflags(write=False)
            object.__setattr__(self, "table", table)
        if self.kind is WeightKind.EXPLICIT and self.expression not in EXPRESSIONS:
            raise ConfigError(f"unknown weight expression {self.expression!r}")

    # -- constructors --------------------------------------------------------

    @classmethod
    def power_radial(cls, alpha: float) -> "Weight":
        """(1 − |z|²)^α."""
        return cls(WeightKind.POWER_RADIAL, alpha=float(alpha))

    @classmethod
    def constant(cls, value: float = 1.0) -> "Weight":
        return cls(WeightKind.POWER_RADIAL, alpha=0.0, scale=float(value))

    @classmethod
    def product(cls, factors) -> "Weight":
        """Π_k (1 − |φ_{a_k}(z)|²)^{α_k} for (α_k, a_k) pairs."""
        packed = tuple((float(a), tuple(complex(c) for c in np.atleast_1d(center))) for a, center in factors)
        return cls(WeightKind.PRODUCT, factors=packed)

    @classmethod
    def tabulated(cls, tree: BergmanTree, table) -> "Weight":
        return cls(WeightKind.CELL_TABULATED, tree=tree, table=table)

    @classmethod
    def explicit(cls, name: str) -> "Weight":
        return cls(WeightKind.EXPLICIT, expression=name)

    @classmethod
    def from_spec(cls, spec: dict, tree: Optional[BergmanTree] = None) -> "Weight":
        """Build a weight from its config entry; any malformed entry is a ConfigError."""
        try:
            kind = WeightKind(spec["kind"])
            if kind is WeightKind.POWER_RADIAL:
                weight = cls.power_radial(spec.get("alpha", 0.0))
            elif kind is WeightKind.PRODUCT:
                weight = cls.product([(f["alpha"], _center(f.get("center", [0.0]))) for f in spec["factors"]])
            elif kind is WeightKind.CELL_TABULATED:
                if tree is None:
                    raise ConfigError("a cell-tabulated weight needs the working tree")
                weight = cls.tabulated(tree, spec["table"])
            else:
                weight = cls.explicit(spec["expression"])
            return weight.scaled(spec.get("scale", 1.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad weight spec {spec!r}: {exc}") from exc

    # -- algebra -------------------------------------------------------------

    def scaled(self, factor: float) -> "Weight":
        return replace(self, scale=self.scale * float(factor))

    def dual(self, p: float) -> "Weight":
        """w^{1 − p'}."""
        if not p > 1.0:
            raise DomainError(f"exponent p must exceed 1, got {p}")
        exponent = 1.0 - p / (p - 1.0)
        return replace(self, scale=self.scale ** exponent, power=self.power * exponent)

    def inverse(self) -> "Weight":
        return replace(self, scale=1.0 / self.scale, power=-self.power)

    def sqrt(self) -> "Weight":
        return replace(self, scale=np.sqrt(self.scale), power=0.5 * self.power)

    @property
    def is_power_radial(self) -> bool:
        return self.kind is WeightKind.POWER_RADIAL

    @property
    def radial_exponent(self) -> float:
        """Effective α of a power-radial weight after powers are folded in."""
        if not self.is_power_radial:
            raise DomainError("only power-radial weights have a radial exponent")
        return self.alpha * self.power

    # -- evaluation ----------------------------------------------------------

    def base(self, points) -> np.ndarray:
        z = np.atleast_2d(check_in_ball(points))
        if self.kind is WeightKind.POWER_RADIAL:
            if self.alpha == 0.0:
                return np.ones(z.shape[0])
            return _one_minus_norm2(z) ** self.alpha
        if self.kind is WeightKind.PRODUCT:
            out = np.ones(z.shape[0])
            base = _one_minus_norm2(z)
            for alpha, center in self.factors:
                a = np.asarray(center, dtype=complex)
                # 1 − |φ_a(z)|² = (1 − |a|²)(1 − |z|²)/|1 − ⟨z, a⟩|²
                gap = (1.0 - np.sum(np.abs(a) ** 2)) * base / np.abs(1.0 - inner(z, a)) ** 2
                out = out * gap ** alpha
            return out
        if self.kind is WeightKind.CELL_TABULATED:
            return self.table[self.tree.locate(z, clamp=True)]
        return np.asarray(EXPRESSIONS[self.expression](z), dtype=float)

    def __call__(self, points) -> np.ndarray:
        values = self.base(points)
        if self.power != 1.0:
            values = values ** self.power
        return self.scale * values

    def spec(self) -> dict:
        out = {"kind": self.kind.value, "scale": self.scale, "power": self.power}
        if self.kind is WeightKind.POWER_RADIAL:
            out["alpha"] = self.alpha
        elif self.kind is WeightKind.PRODUCT:
            out["factors"] = [
                {"alpha": a, "center": [[c.real, c.imag] for c in center]} for a, center in self.factors
            ]
        elif self.kind is WeightKind.EXPLICIT:
            out["expression"] = self.expression
        else:
            out["table"] = "tree-cells"
        return out

    def label(self) -> str:
        if self.kind is WeightKind.POWER_RADIAL:
            text = f"(1-|z|^2)^{self.alpha * self.power:g}"
        elif self.kind is WeightKind.EXPLICIT:
            text = f"{self.expression}^{self.power:g}"
        else:
            text = f"{self.kind.value}^{self.power:g}"
        return text if self.scale == 1.0 else f"{self.scale:g}*{text}"


def _center(raw) -> np.ndarray:
    """Config centres are [re, im] pairs (or plain reals) per coordinate."""
    coords = []
    for item in raw:
        if isinstance(item, (list, tuple)):
            coords.append(complex(item[0], item[1]))
        else:
            coords.append(complex(item))
    return np.asarray(coords, dtype=complex)


def node_values(weight: Weight, rule) -> np.ndarray:
    """Weight values at the rule nodes; raises when any value is not strictly positive."""
    values = weight(rule.nodes)
    if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
        raise DomainError(f"weight {weight.label()} is not strictly positive and finite on the rule")
    return values
