"""Closed-form acquisitions and their Monte-Carlo average over a posterior ensemble.

Conventions: the objective is minimized, outputs are standardized, and every
acquisition is a score to be *maximized*.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ModboError, NumericalError, ParameterError
from .samplers import PosteriorEnsemble
from .surrogates import Dataset, PredictiveMoments, condition

log = logging.getLogger(__name__)

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str = "EI"
    exploration_weight: float = 2.0

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in ("EI", "LCB"):
            raise ParameterError(f"unknown acquisition {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "LCB" and not self.exploration_weight > 0:
            raise ParameterError("LCB exploration weight must be positive")


def ei_array(mean, std, incumbent):
    """Vectorized expected improvement below ``incumbent``."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    imp = incumbent - mean
    safe = np.where(std > 0, std, 1.0)
    z = imp / safe
    out = imp * ndtr(z) + std * INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return np.where(std > 0, np.maximum(out, 0.0), np.maximum(imp, 0.0))


def ei(moments: PredictiveMoments, incumbent: float) -> float:
    """E[max(incumbent - f, 0)] for f ~ N(mean, variance)."""
    return float(ei_array(moments.mean, moments.std, incumbent))


def lcb_score(moments: PredictiveMoments, weight: float = 2.0) -> float:
    """``weight * std - mean``; maximizing it minimizes the lower confidence bound."""
    return float(weight * moments.std - moments.mean)


class MarginalAcquisition:
    """Average of per-sample closed-form acquisitions at ``h* = 0``.

    Each ensemble member is conditioned on the data once; members whose
    factorization fails are dropped (and counted in ``dropped``). The
    incumbent is the best standardized observation, shared by all members.
    """

    def __init__(self, ensemble: PosteriorEnsemble, data: Dataset, spec: AcquisitionSpec = AcquisitionSpec()):
        if len(ensemble) == 0:
            raise ParameterError("empty posterior ensemble")
        self.spec = spec
        self.incumbent = float(np.min(data.F)) if data.n else 0.0
        self.members = []
        self.dropped = 0
        last_error = None
        for sample in ensemble:
            try:
                self.members.append(condition(ensemble.variant, data, sample))
            except ModboError as exc:
                self.dropped += 1
                last_error = exc
                log.warning("dropping ensemble member: %s", exc)
        if not self.members:
            raise NumericalError(f"every ensemble member failed ({last_error})",
                                 getattr(last_error, "jitter", float("nan")))

    def _score(self, mean, var):
        std = np.sqrt(var)
        if self.spec.kind == "EI":
            return ei_array(mean, std, self.incumbent)
        return self.spec.exploration_weight * std - mean

    def __call__(self, Xq) -> np.ndarray:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        total = np.zeros(Xq.shape[0])
        for member in self.members:
            mean, var = member.predict(Xq)
            total += self._score(mean, var)
        return total / len(self.members)

    def moments(self, Xq):
        """Mixture mean and variance of f* across members."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        means = []
        variances = []
        for member in self.members:
            m, v = member.predict(Xq)
            means.append(m)
            variances.append(v)
        means = np.array(means)
        mix_mean = means.mean(axis=0)
        mix_var = np.mean(variances, axis=0) + means.var(axis=0)
        return mix_mean, mix_var


def marginal_acquisition(x_star, ensemble: PosteriorEnsemble, data: Dataset,
                         spec: AcquisitionSpec = AcquisitionSpec()) -> float:
    """Monte-Carlo marginal acquisition at a single query point."""
    return float(MarginalAcquisition(ensemble, data, spec)(np.atleast_1d(x_star)[None, :])[0])
