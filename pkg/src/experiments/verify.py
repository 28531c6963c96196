"""
Verification runs on the ball. Each run measures both sides of an
inequality on the working tent system and again on the system truncated
REFINE_STEP levels shallower, and returns a RatioReport.
"""
import logging
import math
from dataclasses import replace
from typing import Callable, Optional, Sequence

import joblib
import numpy as np

from config import settings
from src.errors import DomainError
from src.geometry.ball import BallPoint, CarlesonTent
from src.geometry.quadrature import QuadratureRule
from src.experiments.reports import RatioReport
from src.operators.kernels import KernelKind
from src.operators.norms import modal_projection_norm, operator_norm
from src.orlicz.young import YoungFunction, young_bp_check
from src.tree.covering import covering_carleson_tent, covering_dyadic_tent
from src.tree.tents import TentSystem
from src.weights.characteristics import (
    ApexGrid,
    b_infty_values,
    bp_classical,
    growth_flag,
    joint_bp_products,
    orlicz_bump_values,
)
from src.weights.weight import Weight, node_values

logger = logging.getLogger(__name__)

COMPARABILITY_BRACKET = (1.0 / 8.0, 8.0)
MAX_EQUIVALENCE_SPREAD = 8.0
# ‖P‖ = 1 at w = σ ≡ 1 and every characteristic equals one
IDENTITY_TOLERANCE = 0.1
PROP34_SLACK = 1.05


def _coarse(system: TentSystem) -> TentSystem:
    depth = max(0, system.depth - settings.REFINE_STEP)
    return system if depth == system.depth else system.restricted(depth)


def _truncation(system: TentSystem, coarse: TentSystem) -> dict:
    return {"depth": system.depth, "coarse_depth": coarse.depth, "trees": len(system.trees), "nodes": system.rule.size}


def _sides(system: TentSystem, sides: Callable[[TentSystem], tuple]):
    """
    `sides` returns (lhs, rhs, hypotheses) where hypotheses maps the name of
    each characteristic the inequality assumes finite to its value.
    """
    coarse = _coarse(system)
    lhs, rhs, hypotheses = sides(system)
    coarse_lhs, coarse_rhs, coarse_hypotheses = sides(coarse)
    diverging = tuple(
        name for name in sorted(hypotheses)
        if growth_flag(coarse_hypotheses[name], hypotheses[name])
    )
    if diverging:
        logger.info("hypotheses %s grow across the refinement; the ratio is not applicable", ", ".join(diverging))
    return lhs, rhs, coarse_lhs / coarse_rhs, _truncation(system, coarse), diverging


def _bp2(system: TentSystem, w_values, sigma_values) -> float:
    return float(joint_bp_products(system, w_values, sigma_values, 2.0).max())


def _b_infty(system: TentSystem, values) -> float:
    return float(b_infty_values(system, values).max())


def _is_unit(weight: Weight) -> bool:
    return weight.is_power_radial and weight.radial_exponent == 0.0 and weight.scale == 1.0


def _around(expected: float, tolerance: float = IDENTITY_TOLERANCE) -> tuple:
    return (expected * (1.0 - tolerance), expected * (1.0 + tolerance))


def verify_prop42(w: Weight, sigma: Weight, trees, rule: Optional[QuadratureRule] = None, dual: bool = False) -> RatioReport:
    """
    max over tents K̂₀ of ‖1_{K̂₀}Λ(σ1_{K̂₀})‖²_{L²(w)} / ([σ, w]_{B₂}[σ]_{B_∞}σ(K̂₀)).
    With `dual` the roles of w and σ are exchanged.
    """
    system = TentSystem.ensure(trees, rule)
    if dual:
        w, sigma = sigma, w

    def sides(sys: TentSystem):
        wv, sv = node_values(w, sys.rule), node_values(sigma, sys.rule)
        constants = sys.collection.testing_constants(wv, sv, 2.0)
        b2, b_inf = _bp2(sys, sv, wv), _b_infty(sys, sv)
        return constants.forward, b2 * b_inf, {"b2": b2, "b_infty_sigma": b_inf}

    lhs, rhs, coarse_ratio, truncation, diverging = _sides(system, sides)
    inputs = {"w": w.label(), "sigma": sigma.label(), "dual": dual}
    return RatioReport("prop42_dual" if dual else "prop42", lhs, rhs, coarse_ratio, inputs, truncation,
                       {"tau_hat": system.collection.tau}, diverging=diverging)


def projection_norm(
    sigma: Weight,
    w: Weight,
    rule: QuadratureRule,
    method: str = "discrete",
) -> float:
    if method == "modal":
        return modal_projection_norm(w, sigma, rule.d)
    if method != "discrete":
        raise DomainError(f"unknown norm method {method!r}")
    return operator_norm(KernelKind.PROJECTION, sigma, w, rule)


def verify_theorem1(
    w: Weight,
    sigma: Weight,
    trees,
    rule: Optional[QuadratureRule] = None,
    norm_rule: Optional[QuadratureRule] = None,
    norm_method: str = "discrete",
) -> RatioReport:
    """
    ‖P(σ·)‖_{L²(σ)→L²(w)} / ([w, σ]_{B₂}^{1/2}([w]_{B_∞}^{1/2} + [σ]_{B_∞}^{1/2})).
    At w = σ ≡ 1 the ratio must be 1/2 within 10%.
    """
    system = TentSystem.ensure(trees, rule)
    norm = projection_norm(sigma, w, norm_rule or system.rule, norm_method)

    def sides(sys: TentSystem):
        wv, sv = node_values(w, sys.rule), node_values(sigma, sys.rule)
        b2, b_inf_w, b_inf_sigma = _bp2(sys, wv, sv), _b_infty(sys, wv), _b_infty(sys, sv)
        rhs = math.sqrt(b2) * (math.sqrt(b_inf_w) + math.sqrt(b_inf_sigma))
        return norm, rhs, {"b2": b2, "b_infty_w": b_inf_w, "b_infty_sigma": b_inf_sigma}

    lhs, rhs, coarse_ratio, truncation, diverging = _sides(system, sides)
    inputs = {"w": w.label(), "sigma": sigma.label(), "norm_method": norm_method}
    bracket = _around(0.5) if _is_unit(w) and _is_unit(sigma) else None
    return RatioReport("theorem1", lhs, rhs, coarse_ratio, inputs, truncation, bracket=bracket, diverging=diverging)


def verify_theorem_a(w: Weight, trees, rule: Optional[QuadratureRule] = None, **kwargs) -> RatioReport:
    """The one-weight case σ = w⁻¹."""
    report = verify_theorem1(w, w.inverse(), trees, rule, **kwargs)
    return replace(report, name="theorem_a")


def verify_theorem2(
    w: Weight,
    sigma: Weight,
    phi: YoungFunction,
    psi: YoungFunction,
    trees,
    rule: Optional[QuadratureRule] = None,
    norm_rule: Optional[QuadratureRule] = None,
    norm_method: str = "discrete",
) -> RatioReport:
    """‖P(σ·)‖_{L²(σ)→L²(w)} / [w, σ]_{Φ,Ψ}; both Young functions must lie in 𝓑₂."""
    young_bp_check(phi, 2.0).require("Φ", 2.0)
    young_bp_check(psi, 2.0).require("Ψ", 2.0)
    system = TentSystem.ensure(trees, rule)
    norm = projection_norm(sigma, w, norm_rule or system.rule, norm_method)

    def sides(sys: TentSystem):
        wv, sv = node_values(w, sys.rule), node_values(sigma, sys.rule)
        values = orlicz_bump_values(sys, wv, sv, phi, psi)
        return norm, float(values.max()), {"b_infty_w": _b_infty(sys, wv), "b_infty_sigma": _b_infty(sys, sv)}

    lhs, rhs, coarse_ratio, truncation, diverging = _sides(system, sides)
    inputs = {"w": w.label(), "sigma": sigma.label(), "phi": phi.label(), "psi": psi.label(), "norm_method": norm_method}
    bracket = None
    if _is_unit(w) and _is_unit(sigma):
        # ⟨1⟩_Φ = 1/Φ⁻¹(1), so the bump of the unit pair is 1/(Φ⁻¹(1)Ψ⁻¹(1))
        bracket = _around(float(phi.inverse(1.0)) * float(psi.inverse(1.0)))
    return RatioReport("theorem2", lhs, rhs, coarse_ratio, inputs, truncation, bracket=bracket, diverging=diverging)


def verify_prop34(sigma: Weight, p: float, trees, rule: Optional[QuadratureRule] = None) -> RatioReport:
    """[σ]_{B_∞} / [σ]_{B_p} with [σ]_{B_p} = [σ, σ^{1−p'}]_{B_p}; at most 1 up to quadrature slack."""
    system = TentSystem.ensure(trees, rule)
    dual = sigma.dual(p)

    def sides(sys: TentSystem):
        sv = node_values(sigma, sys.rule)
        bp = float(joint_bp_products(sys, sv, node_values(dual, sys.rule), p).max())
        return _b_infty(sys, sv), bp, {"bp": bp}

    lhs, rhs, coarse_ratio, truncation, diverging = _sides(system, sides)
    return RatioReport("prop34", lhs, rhs, coarse_ratio, {"sigma": sigma.label(), "p": p}, truncation,
                       bracket=(0.0, PROP34_SLACK), diverging=diverging)


def compare_characteristics(
    w: Weight,
    sigma: Weight,
    trees,
    apex_grid: ApexGrid,
    rule: Optional[QuadratureRule] = None,
) -> RatioReport:
    """Dyadic against classical joint B₂; evidence requires the ratio inside [1/8, 8]."""
    system = TentSystem.ensure(trees, rule)
    coarse = _coarse(system)
    wv, sv = node_values(w, system.rule), node_values(sigma, system.rule)

    classical = bp_classical(w, sigma, 2.0, apex_grid, system.rule)
    fine_dyadic = _bp2(system, wv, sv)
    coarse_dyadic = _bp2(coarse, wv, sv)
    truncation = {**_truncation(system, coarse), **apex_grid.describe()}
    extra = {"classical_extremal": str(classical.extremal_set), "classical_coarse": classical.trend[0]}
    return RatioReport(
        "compare_b2", fine_dyadic, classical.value, coarse_dyadic / classical.trend[0],
        {"w": w.label(), "sigma": sigma.label()}, truncation, extra, COMPARABILITY_BRACKET,
    )


def sawyer_constants_ball(w: Weight, sigma: Weight, trees, rule: Optional[QuadratureRule] = None, p: float = 2.0) -> RatioReport:
    """
    Testing constants 𝔗, 𝔗' of Λ over the tents, the discretized norm of
    Λ(σ·) and norm/(𝔗^{1/p} + 𝔗'^{1/p'}).
    """
    if p != 2.0:
        raise DomainError("the discretized norm of Λ is computed in L² only")
    system = TentSystem.ensure(trees, rule)

    def sides(sys: TentSystem):
        constants = sys.collection.testing_constants(node_values(w, sys.rule), node_values(sigma, sys.rule), p)
        norm = operator_norm(KernelKind.SPARSE, sigma, w, sys.rule, sys)
        return norm, constants.combined(p), {}

    lhs, rhs, coarse_ratio, truncation, _ = _sides(system, sides)
    constants = system.collection.testing_constants(node_values(w, system.rule), node_values(sigma, system.rule), p)
    extra = {"forward": constants.forward, "backward": constants.backward}
    bracket = (1.0 / MAX_EQUIVALENCE_SPREAD, MAX_EQUIVALENCE_SPREAD)
    return RatioReport("sawyer_ball", lhs, rhs, coarse_ratio, {"w": w.label(), "sigma": sigma.label()}, truncation, extra, bracket)


# -- covering and comparison audits ------------------------------------------

def covering_audit(trees, rule: QuadratureRule, apexes: Sequence, nodes_per_tree: int = 20) -> list:
    """Rows for both covering directions: Carleson tents at `apexes`, then kubes of the first tree."""
    system = TentSystem.ensure(trees, rule)
    rows = []
    for apex in apexes:
        tent = CarlesonTent(apex if isinstance(apex, BallPoint) else BallPoint(apex))
        cover = covering_dyadic_tent(system.trees, tent, system.rule, system)
        rows.append({"direction": "carleson-in-dyadic", "apex_norm": 0.0 if tent.is_origin else tent.apex.norm, **cover.to_row()})
    tree = system.trees[0]
    populated = np.flatnonzero(system.measures[0].tent_mass > 0.0)
    for node_id in populated[populated > 0][:nodes_per_tree]:
        cover = covering_carleson_tent(tree, tree.node(node_id), system.rule, system)
        rows.append({"direction": "dyadic-in-carleson", "node": tree.node(node_id).label, **cover.to_row()})
    return rows


def run_sweep(points: Sequence, task: Callable, threads: Optional[int] = None) -> list:
    """Evaluate `task(point)` for every sweep point on a thread pool; order is preserved."""
    threads = settings.THREADS if threads is None else threads
    logger.info("sweep: %d points on %d thread(s)", len(points), threads)
    return joblib.Parallel(n_jobs=threads, prefer="threads")(joblib.delayed(task)(point) for point in points)


def power_radial_pairs(alphas: Sequence[float]) -> list:
    return [(Weight.power_radial(a), Weight.power_radial(b)) for a in alphas for b in alphas]
