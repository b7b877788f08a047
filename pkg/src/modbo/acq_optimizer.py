"""delta-cover sampling: random search in a box that halves in volume every round."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class CoverConfig:
    iterations: int = 30
    samples_per_iter: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.samples_per_iter < 1:
            raise ParameterError("iterations and samples_per_iter must be >= 1")


def shrink_factor(dim: int) -> float:
    return 2.0 ** (-1.0 / dim)


def delta_cover_maximize(score: Callable[[np.ndarray], np.ndarray], dim: int,
                         config: CoverConfig = CoverConfig(), history: list | None = None):
    """Maximize ``score`` over the unit hypercube.

    ``score`` takes an ``(n, dim)`` batch and returns ``n`` values. Each round
    draws ``samples_per_iter`` uniform points in the current box, then
    recentres the box on the best point seen so far and multiplies every side
    by ``2**(-1/dim)``. A box poking out of the domain is translated back
    inside, keeping its side length. Ties keep the earliest sample.

    If ``history`` is a list, one ``(lower_corner, side, best_score)`` tuple
    is appended per round, describing the box for the *next* round.

    Returns
    -------
    best_x : ndarray of shape (dim,)
    best_score : float
    """
    if dim < 1:
        raise ParameterError("dim must be >= 1")
    rng = np.random.default_rng(config.seed)
    lower = np.zeros(dim)
    side = 1.0
    best_x = None
    best = -np.inf
    for k in range(1, config.iterations + 1):
        pts = lower + side * rng.uniform(size=(config.samples_per_iter, dim))
        np.clip(pts, 0.0, 1.0, out=pts)
        vals = np.asarray(score(pts), dtype=float).reshape(-1)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        i = int(np.argmax(vals))
        if best_x is None or vals[i] > best:
            best = float(vals[i])
            best_x = pts[i].copy()
        # computed directly so the volume is 2**-k up to rounding, with no drift
        side = 2.0 ** (-k / dim)
        lower = np.clip(best_x - 0.5 * side, 0.0, 1.0 - side)
        if history is not None:
            history.append((lower.copy(), side, best))
    return best_x, best
