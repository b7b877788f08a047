"""Posterior inference for the surrogate families.

Slice sampling (coordinate-wise, stepping-out + shrinkage) is used for the
low-dimensional noiseless and homoscedastic GPs; HMC with step-size
adaptation is used for the heteroscedastic GP and the LGP, whose parameter
count grows with the data.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ModboError, ParameterError, SamplerError
from .surrogates import (
    Dataset,
    SurrogateSample,
    Variant,
    DensityTarget,
    as_variant,
    sample_from_vector,
)

log = logging.getLogger(__name__)

MAX_STEP_OUT = 100
DIVERGENCE_THRESHOLD = 1000.0
INIT_LOG_NOISE_VARIANCE = -4.0  # log sigma = -2


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 1500
    thinning: int = 10
    num_samples: int = 30
    target_accept: float = 0.75
    adapt_fraction: float = 0.8
    leapfrog_steps: int = 10
    seed: int = 0
    initial_step_size: float = 0.1
    slice_width: float = 1.0

    def __post_init__(self):
        if self.burn_in < 0 or self.thinning < 1 or self.num_samples < 1:
            raise ParameterError("need burn_in >= 0, thinning >= 1, num_samples >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ParameterError("target_accept must lie in (0, 1)")
        if not 0.0 < self.adapt_fraction <= 1.0:
            raise ParameterError("adapt_fraction must lie in (0, 1]")
        if self.leapfrog_steps < 1:
            raise ParameterError("leapfrog_steps must be >= 1")

    @property
    def total_iterations(self) -> int:
        return self.burn_in + self.num_samples * self.thinning

    def replace(self, **changes) -> "ChainConfig":
        return dataclasses.replace(self, **changes)


PROFILES = {
    "desk": ChainConfig(burn_in=1500, thinning=10, num_samples=30),
    "paper": ChainConfig(burn_in=30000, thinning=50, num_samples=100),
}


def chain_profile(name: str) -> ChainConfig:
    try:
        return PROFILES[name]
    except KeyError:
        raise ParameterError(f"unknown chain profile {name!r}; choose from {sorted(PROFILES)}") from None


@dataclass
class ChainResult:
    """Kept draws of one chain, plus diagnostics."""

    draws: np.ndarray
    acceptance_rate: float
    step_size: float | None = None
    divergences: int = 0
    n_evals: int = 0

    def diagnostics(self) -> dict:
        out = {"acceptance_rate": float(self.acceptance_rate), "divergences": int(self.divergences)}
        if self.step_size is not None:
            out["step_size"] = float(self.step_size)
        return out


def _kept(iteration: int, config: ChainConfig) -> bool:
    k = iteration - config.burn_in
    return k >= 0 and (k + 1) % config.thinning == 0


def slice_sample_chain(log_density: Callable[[np.ndarray], float], init, config: ChainConfig) -> ChainResult:
    """Coordinate-wise univariate slice sampling.

    Each sweep updates every coordinate in turn with Neal's stepping-out
    procedure (at most 100 steps of width ``w`` in total) followed by
    shrinkage. Widths start at ``config.slice_width`` and are reset to the
    mean stepped-out interval width once burn-in ends.
    """
    rng = np.random.default_rng(config.seed)
    x = np.array(init, dtype=float)
    k = x.size
    n_evals = 0

    def f(z):
        nonlocal n_evals
        n_evals += 1
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                v = float(log_density(z))
        except (ModboError, FloatingPointError):
            return -math.inf
        return v if math.isfinite(v) else -math.inf

    lp = f(x)
    if not math.isfinite(lp):
        raise SamplerError("log density is not finite at the initial point")
    widths = np.full(k, float(config.slice_width))
    width_sum = np.zeros(k)
    width_count = 0
    draws = []
    moves = 0
    for it in range(config.total_iterations):
        if it == config.burn_in and width_count:
            widths = width_sum / width_count
        for d in range(k):
            x0 = x[d]
            level = lp - rng.exponential()
            w = widths[d]
            left = x0 - rng.uniform() * w
            right = left + w
            j = int(math.floor(MAX_STEP_OUT * rng.uniform()))
            m = MAX_STEP_OUT - 1 - j
            probe = x.copy()
            while j > 0:
                probe[d] = left
                if f(probe) <= level:
                    break
                left -= w
                j -= 1
            while m > 0:
                probe[d] = right
                if f(probe) <= level:
                    break
                right += w
                m -= 1
            if it < config.burn_in:
                width_sum[d] += right - left
            while True:
                cand = left + rng.uniform() * (right - left)
                probe[d] = cand
                lp_c = f(probe)
                if lp_c > level:
                    x = probe
                    lp = lp_c
                    moves += cand != x0
                    break
                if cand < x0:
                    left = cand
                else:
                    right = cand
                if right - left < 1e-12:
                    break
        if it < config.burn_in:
            width_count += 1
        if _kept(it, config):
            draws.append(x.copy())
    rate = moves / max(1, k * config.total_iterations)
    return ChainResult(np.array(draws), rate, None, 0, n_evals)


def adapt_step_size(current: float, accept_prob: float, iteration: int, target: float) -> float:
    """Robbins-Monro update of the log step size toward a target acceptance rate."""
    if not current > 0:
        raise ParameterError("step size must be positive")
    eta = 0.05 / (1.0 + iteration / 100.0)
    return current * math.exp(eta * (accept_prob - target))


def _initial_step_size(f, x, lp, grad, eps, rng, max_rounds=20):
    """Double or halve ``eps`` until one leapfrog step crosses acceptance 1/2."""
    p0 = rng.standard_normal(x.size)

    def log_ratio(e):
        p = p0 + 0.5 * e * grad
        xn = x + e * p
        lpn, gn = f(xn)
        if gn is None:
            return -math.inf
        p = p + 0.5 * e * gn
        out = (lpn - 0.5 * p @ p) - (lp - 0.5 * p0 @ p0)
        return out if math.isfinite(out) else -math.inf

    r = log_ratio(eps)
    direction = 1.0 if r > -math.log(2.0) else -1.0
    for _ in range(max_rounds):
        if direction > 0 and not r > -math.log(2.0):
            break
        if direction < 0 and not r < -math.log(2.0):
            break
        eps *= 2.0 ** direction
        r = log_ratio(eps)
    return eps


def hmc_chain(log_density_and_grad: Callable[[np.ndarray], tuple], init, config: ChainConfig) -> ChainResult:
    """Hamiltonian Monte Carlo with an identity mass matrix.

    The starting step size is first doubled or halved until a single
    leapfrog step crosses acceptance 1/2. It then adapts during the first
    ``adapt_fraction`` of burn-in and is frozen afterwards. Trajectories whose energy error exceeds 1000 (or hits a
    non-finite value) are rejected and counted as divergences; a chain with
    more than 90% divergences raises :class:`SamplerError`. The reported
    acceptance rate covers the post-adaptation iterations only.
    """
    rng = np.random.default_rng(config.seed)
    x = np.array(init, dtype=float)
    n_evals = 0

    def f(z):
        nonlocal n_evals
        n_evals += 1
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                v, g = log_density_and_grad(z)
        except (ModboError, FloatingPointError):
            return -math.inf, None
        v = float(v)
        if not math.isfinite(v) or not np.all(np.isfinite(g)):
            return -math.inf, None
        return v, np.asarray(g, dtype=float)

    lp, grad = f(x)
    if grad is None:
        raise SamplerError("log density is not finite at the initial point")
    eps = _initial_step_size(f, x, lp, grad, float(config.initial_step_size), rng)
    n_adapt = int(config.adapt_fraction * config.burn_in)
    total = config.total_iterations
    draws = []
    divergences = 0
    accepted_post = 0
    n_post = 0
    for it in range(total):
        p0 = rng.standard_normal(x.size)
        u = rng.uniform()
        xn, gn, lpn = x, grad, lp
        p = p0 + 0.5 * eps * gn
        ok = True
        for step in range(config.leapfrog_steps):
            xn = xn + eps * p
            lpn, gn = f(xn)
            if gn is None:
                ok = False
                break
            if step < config.leapfrog_steps - 1:
                p = p + eps * gn
        if ok:
            p = p + 0.5 * eps * gn
            energy_error = (-lpn + 0.5 * p @ p) - (-lp + 0.5 * p0 @ p0)
            ok = math.isfinite(energy_error) and energy_error <= DIVERGENCE_THRESHOLD
        if ok:
            accept_prob = 1.0 if energy_error <= 0 else math.exp(-energy_error)
        else:
            divergences += 1
            accept_prob = 0.0
        accepted = u < accept_prob
        if accepted:
            x, lp, grad = xn, lpn, gn
        if it < n_adapt:
            eps = adapt_step_size(eps, accept_prob, it, config.target_accept)
        else:
            n_post += 1
            accepted_post += accepted
        if _kept(it, config):
            draws.append(x.copy())
    if divergences > 0.9 * total:
        raise SamplerError(f"{divergences}/{total} HMC trajectories diverged")
    rate = accepted_post / n_post if n_post else float("nan")
    return ChainResult(np.array(draws), rate, eps, divergences, n_evals)


@dataclass
class PosteriorEnsemble:
    """M posterior draws of one surrogate, with per-chain diagnostics."""

    variant: Variant
    samples: list[SurrogateSample]
    diagnostics: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @classmethod
    def concatenate(cls, ensembles: list["PosteriorEnsemble"]) -> "PosteriorEnsemble":
        variant = ensembles[0].variant
        samples = [s for e in ensembles for s in e.samples]
        diagnostics = [d for e in ensembles for d in e.diagnostics]
        return cls(variant, samples, diagnostics)


def infer_posterior(variant, data: Dataset, config: ChainConfig, sigma_h: float | None = None,
                    latent_dim: int = 1) -> PosteriorEnsemble:
    """Run one chain for ``variant`` on ``data`` and wrap the draws as samples.

    LGP chains with ``sigma_h > 0`` run HMC on whitened latent inputs
    ``z = H / sigma_h`` (prior N(0, I)); ``sigma_h = 0`` pins H at zero and
    reduces to the noiseless GP chain.
    """
    variant = as_variant(variant)
    n = data.n
    rng = np.random.default_rng([config.seed, 7])
    diag = {"variant": variant.value, "num_samples": config.num_samples}

    if variant in (Variant.GP, Variant.HOMOSCEDASTIC) or (variant is Variant.LGP and not sigma_h):
        base = Variant.GP if variant is Variant.LGP else variant
        init = [0.0] if base is Variant.GP else [0.0, INIT_LOG_NOISE_VARIANCE]
        target = DensityTarget(base, data)
        result = slice_sample_chain(lambda t: target(t, want_grad=False)[0], init, config)
        diag["sampler"] = "slice"
        if variant is Variant.LGP:
            samples = [sample_from_vector(Variant.LGP, t, n, latent_dim, 0.0) for t in result.draws]
        else:
            samples = [sample_from_vector(variant, t, n) for t in result.draws]
    elif variant is Variant.HETEROSCEDASTIC:
        init = np.r_[0.0, np.full(n, INIT_LOG_NOISE_VARIANCE)]
        result = hmc_chain(DensityTarget(variant, data), init, config)
        diag["sampler"] = "hmc"
        samples = [sample_from_vector(variant, t, n) for t in result.draws]
    else:
        sh = float(sigma_h)
        target = DensityTarget(variant, data, sh, latent_dim)

        def whitened(t):
            raw = t * sh
            raw[0] = t[0]
            lp, g = target(raw)
            g[1:] *= sh
            return lp, g

        init = np.r_[0.0, 0.1 * rng.standard_normal(n * latent_dim)]
        result = hmc_chain(whitened, init, config)
        diag["sampler"] = "hmc"
        samples = [
            sample_from_vector(variant, np.r_[t[0], sh * t[1:]], n, latent_dim, sh)
            for t in result.draws
        ]
    if variant is Variant.LGP:
        diag["sigma_h"] = float(sigma_h or 0.0)
    diag.update(result.diagnostics())
    return PosteriorEnsemble(variant, samples, [diag])
