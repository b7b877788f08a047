"""Gap and regret metrics and the paired Wilcoxon comparison used for result tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, rankdata

from .errors import ProtocolError

EXACT_MAX_N = 20
SIGNIFICANCE = 0.05


def gap(f_first: float, f_best: float, f_opt: float) -> float:
    """Normalized progress ``(f_first - f_best) / (f_first - f_opt)``, clamped to [0, 1].

    ``f_first`` is the best value among the initial random points. When the
    initial design already hit the optimum (zero denominator) the gap is 1.
    """
    if f_opt > f_first:
        raise ProtocolError(f"optimum {f_opt} lies above the initial best {f_first}")
    denom = f_first - f_opt
    if denom == 0:
        return 1.0
    return float(min(1.0, max(0.0, (f_first - f_best) / denom)))


def regret_curve(best_so_far, f_opt: float) -> np.ndarray:
    """Simple regret per iteration; tiny negatives from an estimated optimum are clipped."""
    values = np.asarray(getattr(best_so_far, "best_so_far", best_so_far), dtype=float)
    return np.maximum(values - f_opt, 0.0)


def _signed_rank_statistic(a, b):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0]
    if d.size == 0:
        return None, None
    ranks = rankdata(np.abs(d))
    return float(np.sum(ranks[d > 0])), ranks


def _exact_null_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """Number of sign patterns giving each (doubled) positive-rank sum."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        counts[r:] = counts[r:] + counts[:-r].copy()
    return counts


def wilcoxon_two_sided(paired_a, paired_b) -> float:
    """Two-sided p-value of the paired Wilcoxon signed-rank test.

    Zero differences are dropped and tied magnitudes get average ranks. For at
    most 20 nonzero differences the p-value is exact, ``P(|T - mu| >= |t - mu|)``
    under the sign-flip null conditional on the observed ranks; beyond that a
    tie-corrected normal approximation with continuity correction is used.
    """
    a = np.asarray(paired_a, dtype=float)
    b = np.asarray(paired_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ProtocolError("paired samples must be equal-length vectors")
    t_plus, ranks = _signed_rank_statistic(a, b)
    if t_plus is None:
        return 1.0
    n = ranks.size
    mu = ranks.sum() / 2.0
    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _exact_null_counts(doubled)
        support = np.arange(counts.size)
        dev_obs = abs(2 * t_plus - 2 * mu)
        extreme = np.abs(support - 2 * mu) >= dev_obs - 1e-9
        return float(min(1.0, counts[extreme].sum() / 2.0 ** n))
    return _normal_approx_p(t_plus, ranks)


def _normal_approx_p(t_plus: float, ranks: np.ndarray) -> float:
    mu = ranks.sum() / 2.0
    var = np.sum(ranks ** 2) / 4.0
    dev = abs(t_plus - mu)
    if var == 0:
        return 1.0
    z = max(dev - 0.5, 0.0) / math.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(z)))


def wilcoxon_normal_approx(paired_a, paired_b) -> float:
    """Normal-approximation p-value regardless of sample size."""
    t_plus, ranks = _signed_rank_statistic(paired_a, paired_b)
    if t_plus is None:
        return 1.0
    return _normal_approx_p(t_plus, ranks)


@dataclass
class ComparisonTable:
    """Per-method summary with markers for methods not distinguishable from the best."""

    means: dict
    stds: dict
    best: str
    p_values: dict = field(default_factory=dict)
    marked: set = field(default_factory=set)
    higher_is_better: bool = True

    def to_dict(self) -> dict:
        return {
            "best": self.best,
            "higher_is_better": self.higher_is_better,
            "methods": {
                m: {
                    "mean": self.means[m],
                    "std": self.stds[m],
                    "p_vs_best": self.p_values.get(m),
                    "equivalent_to_best": m in self.marked,
                }
                for m in self.means
            },
        }


def mark_equivalent_to_best(per_method: dict, higher_is_better: bool = True,
                            alpha: float = SIGNIFICANCE) -> ComparisonTable:
    """Mark the best-mean method and every method whose paired test against it has p >= alpha."""
    if not per_method:
        raise ProtocolError("no methods to compare")
    arrays = {m: np.asarray(v, dtype=float) for m, v in per_method.items()}
    lengths = {v.size for v in arrays.values()}
    if len(lengths) != 1:
        raise ProtocolError("all methods need the same number of repetitions")
    means = {m: float(v.mean()) for m, v in arrays.items()}
    stds = {m: float(v.std()) for m, v in arrays.items()}
    sign = 1.0 if higher_is_better else -1.0
    # first method wins exact ties in the mean
    best = max(arrays, key=lambda m: sign * means[m])
    table = ComparisonTable(means, stds, best, higher_is_better=higher_is_better)
    for m, v in arrays.items():
        p = 1.0 if m == best else wilcoxon_two_sided(v, arrays[best])
        table.p_values[m] = p
        if p >= alpha:
            table.marked.add(m)
    return table
