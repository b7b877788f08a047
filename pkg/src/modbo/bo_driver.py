"""The outer Bayesian-optimization loop."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .acq_optimizer import CoverConfig, delta_cover_maximize
from .acquisition import AcquisitionSpec, MarginalAcquisition
from .errors import DomainError, ModboError, ParameterError, SamplerError
from .samplers import PROFILES, ChainConfig, PosteriorEnsemble, infer_posterior
from .surrogates import Dataset, Variant, as_variant

log = logging.getLogger(__name__)

DOMAIN_SLACK = 1e-9
SIGMA_H_MODES = ("stratified", "per_iteration")

# salts that keep the seed streams of different consumers apart
_COVER_SALT = 1_000_003
_SIGMA_DRAW_SALT = 2_000_003


def default_sigma_h_candidates(dim: int) -> tuple:
    d = math.sqrt(dim)
    return (0.1 * d, 0.01 * d, 0.0)


@dataclass(frozen=True)
class BOConfig:
    surrogate: Variant = Variant.GP
    acquisition: AcquisitionSpec = AcquisitionSpec()
    budget: int = 50
    initial_points: int = 2
    sigma_h_candidates: tuple | None = None  # None -> default set for the objective's dim
    sigma_h_mode: str = "stratified"
    chain: ChainConfig = PROFILES["desk"]
    cover: CoverConfig = CoverConfig()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "surrogate", as_variant(self.surrogate))
        if self.initial_points < 1:
            raise ParameterError("initial_points must be >= 1")
        if self.budget < self.initial_points:
            raise ParameterError("budget must be at least initial_points")
        if self.sigma_h_mode not in SIGMA_H_MODES:
            raise ParameterError(f"sigma_h_mode must be one of {SIGMA_H_MODES}")
        if self.sigma_h_candidates is not None:
            cands = tuple(float(s) for s in self.sigma_h_candidates)
            if not cands:
                raise ParameterError("sigma_h_candidates must be nonempty")
            if any(not (s >= 0 and math.isfinite(s)) for s in cands):
                raise ParameterError("sigma_h candidates must be finite and nonnegative")
            object.__setattr__(self, "sigma_h_candidates", cands)

    def candidates_for(self, dim: int) -> tuple:
        if self.sigma_h_candidates is None:
            return default_sigma_h_candidates(dim)
        return self.sigma_h_candidates

    def snapshot(self) -> dict:
        return {
            "surrogate": self.surrogate.value,
            "acquisition": dataclasses.asdict(self.acquisition),
            "budget": self.budget,
            "initial_points": self.initial_points,
            "sigma_h_candidates": None if self.sigma_h_candidates is None else list(self.sigma_h_candidates),
            "sigma_h_mode": self.sigma_h_mode,
            "chain": dataclasses.asdict(self.chain),
            "cover": dataclasses.asdict(self.cover),
            "seed": self.seed,
        }


@dataclass
class IterationRecord:
    iteration: int
    x_raw: np.ndarray
    x_unit: np.ndarray
    f_raw: float
    best_so_far: float
    sigma_h: list | None = None
    diagnostics: list = field(default_factory=list)


@dataclass
class RunTrace:
    records: list
    config: dict
    seed: int
    objective: str = ""
    valid: bool = True
    error: str | None = None

    def __len__(self):
        return len(self.records)

    @property
    def f_raw(self) -> np.ndarray:
        return np.array([r.f_raw for r in self.records])

    @property
    def best_so_far(self) -> np.ndarray:
        return np.array([r.best_so_far for r in self.records])

    @property
    def x_raw(self) -> np.ndarray:
        return np.array([r.x_raw for r in self.records])

    def f_first(self, initial_points: int | None = None) -> float:
        """Best value among the initial random design."""
        k = initial_points or self.config.get("initial_points", 1)
        return float(np.min(self.f_raw[:k]))


def _bounds(domain):
    dom = np.asarray(domain, dtype=float)
    if dom.ndim != 2 or dom.shape[1] != 2 or np.any(dom[:, 0] >= dom[:, 1]):
        raise ParameterError("domain must be a list of (lo, hi) pairs with lo < hi")
    return dom[:, 0], dom[:, 1]


def rescale_to_unit(x, domain) -> np.ndarray:
    lo, hi = _bounds(domain)
    x = np.asarray(x, dtype=float)
    u = (x - lo) / (hi - lo)
    if np.any(u < -DOMAIN_SLACK) or np.any(u > 1 + DOMAIN_SLACK):
        raise DomainError(f"{x} lies outside the domain")
    return u


def rescale_from_unit(u, domain) -> np.ndarray:
    lo, hi = _bounds(domain)
    u = np.asarray(u, dtype=float)
    if np.any(u < -DOMAIN_SLACK) or np.any(u > 1 + DOMAIN_SLACK):
        raise DomainError(f"{u} lies outside the unit cube")
    return lo + u * (hi - lo)


def _seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0] >> 1)


def stratum_sizes(num_samples: int, n_candidates: int) -> list:
    """Split M samples over the candidates as evenly as possible (earlier strata take the remainder)."""
    base, extra = divmod(num_samples, n_candidates)
    return [base + (i < extra) for i in range(n_candidates)]


def _posterior(config: BOConfig, data: Dataset, iteration: int, candidates: tuple):
    chain = config.chain
    if config.surrogate is not Variant.LGP:
        ens = infer_posterior(config.surrogate, data, chain.replace(seed=_seed(config.seed, iteration, 0)))
        return ens, None

    if config.sigma_h_mode == "per_iteration":
        rng = np.random.default_rng(_seed(config.seed, iteration, _SIGMA_DRAW_SALT))
        plan = [(0, candidates[int(rng.integers(len(candidates)))], chain.num_samples)]
    else:
        sizes = stratum_sizes(chain.num_samples, len(candidates))
        plan = [(k, s, m) for k, (s, m) in enumerate(zip(candidates, sizes)) if m > 0]

    parts = []
    last_error = None
    for stratum, sh, m in plan:
        cfg = chain.replace(num_samples=m, seed=_seed(config.seed, iteration, stratum))
        try:
            parts.append(infer_posterior(Variant.LGP, data, cfg, sigma_h=sh))
        except ModboError as exc:
            last_error = exc
            log.warning("iteration %d: dropping sigma_h=%g stratum: %s", iteration, sh, exc)
    if not parts:
        raise SamplerError(f"all sigma_h strata failed ({last_error})")
    ens = PosteriorEnsemble.concatenate(parts)
    return ens, [float(s.sigma_h) for s in ens.samples]


def run_bo(objective, config: BOConfig) -> RunTrace:
    """Minimize ``objective`` over its box domain.

    ``objective`` needs a ``domain`` (sequence of ``(lo, hi)``) and must be
    callable on a point in original units. The model works on the unit cube
    with standardized outputs. A failing objective evaluation stops the run
    and returns the partial trace with ``valid=False``; model failures are
    treated the same way.
    """
    lo, hi = _bounds(objective.domain)
    dim = lo.size
    candidates = config.candidates_for(dim)
    trace = RunTrace([], config.snapshot(), config.seed, getattr(objective, "name", ""))
    if trace.config["sigma_h_candidates"] is None:
        trace.config["sigma_h_candidates"] = list(candidates)

    X_unit = []
    F_raw = []
    best = math.inf

    def record(it, u, sig=None, diag=()):
        nonlocal best
        x = rescale_from_unit(u, objective.domain)
        f = float(objective(x))
        if not math.isfinite(f):
            raise ValueError(f"objective returned {f}")
        X_unit.append(u)
        F_raw.append(f)
        best = min(best, f)
        trace.records.append(IterationRecord(it, x, u, f, best, sig, list(diag)))

    init = np.random.default_rng([config.seed]).uniform(size=(config.initial_points, dim))
    it = 0
    try:
        for u in init:
            record(it, u)
            it += 1
        while it < config.budget:
            data = Dataset.from_raw(np.array(X_unit), np.array(F_raw))
            ensemble, sig = _posterior(config, data, it, candidates)
            acq = MarginalAcquisition(ensemble, data, config.acquisition)
            cover = dataclasses.replace(config.cover, seed=_seed(config.seed, it, _COVER_SALT))
            u_next, _ = delta_cover_maximize(acq, dim, cover)
            diag = list(ensemble.diagnostics)
            if acq.dropped:
                diag.append({"dropped_members": acq.dropped})
            record(it, np.clip(u_next, 0.0, 1.0), sig, diag)
            it += 1
    except Exception as exc:  # noqa: BLE001 - any failure ends the run with a partial trace
        log.error("run aborted at iteration %d: %s", it, exc)
        trace.valid = False
        trace.error = f"{type(exc).__name__}: {exc}"
    return trace
