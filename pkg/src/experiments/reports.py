"""
Ratio reports: one verified inequality at one input point, with the ratio
at the working truncation and at the coarser one.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

from src.weights.characteristics import DIVERGENCE_FACTOR


class Verdict(str, Enum):
    BOUNDED = "BOUNDED-EVIDENCE"
    GROWTH = "GROWTH-FLAG"
    NOT_APPLICABLE = "NOT-APPLICABLE"


@dataclass(frozen=True)
class RatioReport:
    name: str
    lhs: float
    rhs: float
    coarse_ratio: float
    inputs: dict = field(default_factory=dict)
    truncation: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    bracket: Optional[Tuple[float, float]] = None
    # characteristics in the hypotheses that grew ≥ DIVERGENCE_FACTOR across the refinement
    diverging: Tuple[str, ...] = ()

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    @property
    def growth(self) -> float:
        if self.coarse_ratio == 0.0:
            return 1.0
        return self.ratio / self.coarse_ratio

    @property
    def in_bracket(self) -> bool:
        if self.bracket is None:
            return True
        low, high = self.bracket
        return low <= self.ratio <= high

    @property
    def applicable(self) -> bool:
        return not self.diverging

    @property
    def verdict(self) -> Verdict:
        if not self.applicable:
            return Verdict.NOT_APPLICABLE
        if self.growth >= DIVERGENCE_FACTOR or not self.in_bracket:
            return Verdict.GROWTH
        return Verdict.BOUNDED

    def to_row(self) -> dict:
        row = {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "coarse_ratio": self.coarse_ratio,
            "growth": self.growth,
            "bracket_low": None if self.bracket is None else self.bracket[0],
            "bracket_high": None if self.bracket is None else self.bracket[1],
            "in_bracket": self.in_bracket,
            "diverging": ";".join(self.diverging),
            "verdict": self.verdict.value,
        }
        row.update({f"input_{k}": v for k, v in sorted(self.inputs.items())})
        row.update({f"truncation_{k}": v for k, v in sorted(self.truncation.items())})
        row.update({k: v for k, v in sorted(self.extra.items())})
        return row


def summarize(reports) -> dict:
    """Max ratio and verdict counts per report name; inapplicable points do not enter the max."""
    out = {}
    for report in reports:
        entry = out.setdefault(report.name, {"max_ratio": 0.0, "points": 0, **{v.value: 0 for v in Verdict}})
        if report.applicable:
            entry["max_ratio"] = max(entry["max_ratio"], report.ratio)
        entry["points"] += 1
        entry[report.verdict.value] += 1
    return out


STABILITY_TOLERANCE = 0.25


def depth_stability(rows, coarse_depth: int, depth: int, tolerance: float = STABILITY_TOLERANCE) -> dict:
    """
    Per row name, the largest relative drift |r_fine / r_coarse − 1| of the
    ratio between the two depths, over the seeded rows present at both.
    """
    ratios = {(row["name"], row["seed"], row["depth"]): row["ratio"] for row in rows if row.get("seed") is not None}
    out = {}
    for (name, seed, at), fine in sorted(ratios.items()):
        coarse = ratios.get((name, seed, coarse_depth))
        if at != depth or not coarse:
            continue
        entry = out.setdefault(name, {"max_drift": 0.0, "seeds": 0})
        entry["max_drift"] = max(entry["max_drift"], abs(fine / coarse - 1.0))
        entry["seeds"] += 1
    for entry in out.values():
        entry["stable"] = entry["max_drift"] <= tolerance
    return out
