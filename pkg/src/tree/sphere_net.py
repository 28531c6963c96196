"""
Maximal δ-separated nets on the Bergman spheres 𝕊_r.

Nets are chosen by greedy farthest-point selection over a deterministic
candidate grid. On a sphere of Euclidean radius t the Bergman distance
between tu and tv is increasing in |1 − t²⟨u, v⟩|, so selection runs on that
quantity and compares against the threshold (1 − t²)·cosh δ.
"""
import heapq
import logging
import math
from typing import Optional

import numpy as np

from config import settings
from src.errors import DomainError, NetSizeError
from src.geometry.ball import bergman_distance
from src.geometry.quadrature import sphere_grid

logger = logging.getLogger(__name__)

MIN_CIRCLE_CANDIDATES = 2 ** 12
CANDIDATES_PER_DELTA = 4


def separation_threshold(radius: float, delta: float) -> float:
    """|1 − t²⟨u, v⟩| at which tu and tv are exactly δ apart, t = tanh(radius)."""
    t2 = math.tanh(radius) ** 2
    return (1.0 - t2) * math.cosh(delta)


def circle_candidate_count(radius: float, delta: float) -> int:
    """
    Power of two with Bergman spacing ≤ δ/4 on 𝕊_radius; the circle has
    Bergman length π·sinh(2·radius).
    """
    needed = CANDIDATES_PER_DELTA * math.pi * math.sinh(2.0 * radius) / delta
    count = MIN_CIRCLE_CANDIDATES
    while count < needed:
        count *= 2
    return count


def sphere_candidate_angular(radius: float, delta: float) -> int:
    needed = 2.0 * math.sinh(2.0 * radius) / delta
    return 64 if needed > 32 else 32


def candidate_directions(d: int, radius: float, delta: float, rotation: float = 0.0) -> np.ndarray:
    if d == 1:
        count = circle_candidate_count(radius, delta)
        angles = rotation + 2.0 * np.pi * np.arange(count) / count
        return np.exp(1j * angles).reshape(-1, 1)
    return sphere_grid(2, sphere_candidate_angular(radius, delta), rotation)


def build_sphere_net(
    radius: float,
    delta: float,
    d: int = 1,
    rotation: float = 0.0,
    cap: Optional[int] = None,
) -> np.ndarray:
    """
    Unit directions of a maximal δ-separated subset of the candidate grid on
    𝕊_radius. Every candidate lies within δ of the net.
    """
    if radius <= 0.0 or delta <= 0.0:
        raise DomainError(f"sphere net needs radius > 0 and delta > 0, got {radius}, {delta}")
    cap = settings.NET_CAP if cap is None else cap
    candidates = candidate_directions(d, radius, delta, rotation)
    threshold = separation_threshold(radius, delta)
    t2 = math.tanh(radius) ** 2

    if d == 1:
        chosen = _circle_greedy(candidates.shape[0], t2, threshold, cap)
    else:
        chosen = _sphere_greedy(candidates, t2, threshold, cap)

    logger.debug("net on S_%.3f: %d of %d candidates", radius, len(chosen), candidates.shape[0])
    return candidates[np.asarray(chosen, dtype=int)]


def _circle_greedy(count: int, t2: float, threshold: float, cap: int) -> list:
    # gap of g steps between consecutive chosen candidates; its farthest
    # candidate sits g // 2 steps after the gap start
    steps = np.arange(count // 2 + 1)
    separation = np.abs(1.0 - t2 * np.exp(2j * np.pi * steps / count))

    chosen = [0]
    heap = [(-(count // 2), count // 2, count)]
    while heap:
        neg_half, middle, gap = heapq.heappop(heap)
        half = -neg_half
        if separation[half] < threshold:
            break
        chosen.append(middle)
        if len(chosen) > cap:
            raise NetSizeError(f"sphere net exceeds the cap of {cap} points")
        start = middle - half
        for sub_start, sub_gap in ((start, half), (middle, gap - half)):
            heapq.heappush(heap, (-(sub_gap // 2), sub_start + sub_gap // 2, sub_gap))
    return sorted(chosen)


def _sphere_greedy(candidates: np.ndarray, t2: float, threshold: float, cap: int) -> list:
    nearest = np.full(candidates.shape[0], np.inf)
    chosen = []
    pick = 0
    while True:
        chosen.append(pick)
        if len(chosen) > cap:
            raise NetSizeError(f"sphere net exceeds the cap of {cap} points")
        gram = candidates @ np.conj(candidates[pick])
        nearest = np.minimum(nearest, np.abs(1.0 - t2 * gram))
        pick = int(np.argmax(nearest))
        if nearest[pick] < threshold:
            break
    return sorted(chosen)


def net_separation(points: np.ndarray) -> float:
    """Smallest pairwise Bergman distance in a point set (dense; audit use)."""
    n = points.shape[0]
    if n < 2:
        return math.inf
    rows, cols = np.triu_indices(n, k=1)
    return float(np.min(bergman_distance(points[rows], points[cols])))


def covering_radius(points: np.ndarray, samples: np.ndarray) -> float:
    """max over samples of the Bergman distance to the nearest point."""
    worst = 0.0
    for chunk in np.array_split(samples, max(1, samples.shape[0] // 512)):
        dist = bergman_distance(chunk[:, None, :], points[None, :, :])
        worst = max(worst, float(np.max(np.min(dist, axis=1))))
    return worst
