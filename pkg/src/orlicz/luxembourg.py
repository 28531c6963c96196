"""
Luxembourg-norm Orlicz averages ⟨f⟩_{Φ,Q} = inf{λ > 0 : ⟨Φ(|f|/λ)⟩_Q ≤ 1}
and the Orlicz maximal function over a sparse collection.

All sets of a collection are solved together: one bisection in log λ with a
per-set bracket. By Jensen the bracket [⟨f⟩_Q, max_Q f]/Φ⁻¹(1) always holds
the root; it is still verified and widened by doubling if rounding says
otherwise.
"""
import logging
from typing import Optional

import numpy as np
from scipy import sparse

from config import settings
from src.errors import SolverError, StarvationError
from src.geometry.quadrature import QuadratureRule
from src.operators.sparse import SparseCollection, row_max
from src.orlicz.young import YoungFunction

logger = logging.getLogger(__name__)

MAX_BISECTIONS = 400
RESIDUAL_SLACK = 1e-12


def grouped_luxembourg(
    values,
    membership,
    masses,
    phi: YoungFunction,
    rtol: Optional[float] = None,
) -> np.ndarray:
    """⟨|f|⟩_{Φ,Q} for every column Q of a points × sets membership matrix."""
    rtol = settings.LUX_RTOL if rtol is None else rtol
    coo = membership.tocoo()
    points, sets = coo.row, coo.col
    n_sets = membership.shape[1]
    f = np.abs(np.asarray(values, dtype=float))[points]
    m = np.asarray(masses, dtype=float)[points]

    set_mass = np.bincount(sets, m, minlength=n_sets)
    if np.any(set_mass <= 0.0):
        raise StarvationError("Luxembourg average over a set with no mass")
    peak = np.zeros(n_sets)
    np.maximum.at(peak, sets, f)
    mean = np.bincount(sets, m * f, minlength=n_sets) / set_mass

    result = np.zeros(n_sets)
    live = peak > 0.0
    if not np.any(live):
        return result

    unit = float(phi.inverse(1.0))
    lo = np.where(live, mean / unit, 1.0)
    hi = np.where(live, peak / unit, 1.0)
    lo = np.minimum(lo, hi)

    def modular(lam):
        scaled = f / lam[sets]
        return np.bincount(sets, m * phi(scaled), minlength=n_sets) / set_mass

    for _ in range(settings.LUX_MAX_DOUBLINGS):
        high_bad = live & (modular(hi) > 1.0 + RESIDUAL_SLACK)
        low_bad = live & (modular(lo) < 1.0 - RESIDUAL_SLACK)
        if not (np.any(high_bad) or np.any(low_bad)):
            break
        hi = np.where(high_bad, 2.0 * hi, hi)
        lo = np.where(low_bad, 0.5 * lo, lo)
    else:
        raise SolverError(f"Luxembourg bracket not found after {settings.LUX_MAX_DOUBLINGS} doublings")

    for _ in range(MAX_BISECTIONS):
        open_ = live & (hi > lo * (1.0 + rtol))
        if not np.any(open_):
            break
        mid = np.sqrt(lo * hi)
        above = modular(mid) > 1.0
        lo = np.where(open_ & above, mid, lo)
        hi = np.where(open_ & ~above, mid, hi)
    else:
        raise SolverError("Luxembourg bisection did not reach the requested tolerance")

    result[live] = hi[live]
    return result


def luxembourg_averages(collection: SparseCollection, values, phi: YoungFunction) -> np.ndarray:
    return grouped_luxembourg(values, collection.membership, collection.point_masses, phi)


def luxembourg_average(f, region, phi: YoungFunction, rule: QuadratureRule) -> float:
    """⟨|f|⟩_{Φ,Q} over the rule nodes of one region (mask, predicate or None)."""
    mask = rule.mask(region)
    if not np.any(mask):
        raise StarvationError("Luxembourg average over a region with no rule node")
    values = rule.evaluate(f)
    rows = np.flatnonzero(mask)
    membership = sparse.csr_matrix((np.ones(rows.size), (rows, np.zeros(rows.size, dtype=int))), shape=(rule.size, 1))
    return float(grouped_luxembourg(values, membership, rule.masses, phi)[0])


def orlicz_maximal(collection: SparseCollection, values, phi: YoungFunction, membership=None) -> np.ndarray:
    """
    M_Φ f = max over sets containing the point of ⟨|f|⟩_{Φ,Q}; evaluated at the
    collection's points, or at the rows of an explicit membership matrix.
    """
    averages = luxembourg_averages(collection, values, phi)
    return row_max(collection.membership if membership is None else membership, averages)
