"""Synthetic objectives used in the comparisons, plus the sawtooth corruption.

Evaluators are vectorized: they accept an array whose last axis has length
``dim`` and return one value per leading index. ``Benchmark.__call__``
evaluates a single point after checking it lies in the domain.

Formulas follow the SigOpt ``evalset`` definitions (including its
Weierstrass variant, whose per-coordinate offset is scaled by ``dim``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError

PI = math.pi
TWO_PI = 2.0 * math.pi
DOMAIN_SLACK = 1e-9


# --------------------------------------------------------------------------
# periodic waves and corruption
# --------------------------------------------------------------------------


def square_wave(t):
    """+1 on the first half of each 2*pi period, -1 on the second half."""
    phase = np.mod(np.asarray(t, dtype=float), TWO_PI)
    out = np.where(phase < PI, 1.0, -1.0)
    return float(out) if out.ndim == 0 else out


def sawtooth(t):
    """Rising ramp from -1 to 1 over each 2*pi period."""
    out = 2.0 * np.mod(np.asarray(t, dtype=float) / TWO_PI, 1.0) - 1.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CorruptionParams:
    a0: float
    a1: float
    a2: float
    a3: float

    @property
    def amplitude_bound(self) -> float:
        return abs(self.a0) + abs(self.a1) + abs(self.a2) + abs(self.a3)


SMALL_CORRUPTION = CorruptionParams(-0.03, 0.05, 0.08, 0.03)
LARGE_CORRUPTION = CorruptionParams(-0.03, 0.20, 0.16, 0.06)
ZERO_CORRUPTION = CorruptionParams(0.0, 0.0, 0.0, 0.0)

_PHASES = (0.3 * PI, 0.0, PI, 0.5 * PI)
_FREQS = (15.0, 10.0, 30.0, 40.0)


def corruption(x, params: CorruptionParams):
    """Gated sum of four sawtooth waves on [0, 1].

    The gate is open (1) where ``square_wave(8 pi x) = +1`` and closed (0)
    elsewhere, so the corruption vanishes on half the interval.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("corruption is defined on [0, 1]")
    sq = square_wave(4.0 * TWO_PI * x)
    gate = sq * (0.5 + 0.5 * sq)
    amps = (params.a0, params.a1, params.a2, params.a3)
    waves = sum(a * sawtooth(p + f * TWO_PI * x) for a, p, f in zip(amps, _PHASES, _FREQS))
    out = gate * waves
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# benchmark container
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Benchmark:
    name: str
    dim: int
    domain: tuple
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    known_min: float
    known_max: float
    properties: tuple = ("none",)

    def __post_init__(self):
        dom = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        if len(dom) != self.dim:
            raise ParameterError(f"{self.name}: domain has {len(dom)} rows for dim {self.dim}")
        if any(lo >= hi for lo, hi in dom):
            raise ParameterError(f"{self.name}: each domain interval needs lo < hi")
        if self.known_min > self.known_max:
            raise ParameterError(f"{self.name}: known_min exceeds known_max")
        object.__setattr__(self, "domain", dom)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.domain])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.domain])

    def check_domain(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DomainError(f"{self.name} expects {self.dim} coordinates, got {X.shape[-1]}")
        span = self.upper - self.lower
        if np.any(X < self.lower - DOMAIN_SLACK * span) or np.any(X > self.upper + DOMAIN_SLACK * span):
            raise DomainError(f"point outside the domain of {self.name}")
        return X

    def evaluate_batch(self, X) -> np.ndarray:
        X = self.check_domain(np.atleast_2d(X))
        return np.asarray(self.evaluator(X), dtype=float)

    def __call__(self, x) -> float:
        x = self.check_domain(np.atleast_1d(np.asarray(x, dtype=float)).ravel())
        return float(self.evaluator(x[None, :])[0])

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "domain": [list(b) for b in self.domain],
            "known_min": self.known_min,
            "known_max": self.known_max,
            "properties": list(self.properties),
        }


# --------------------------------------------------------------------------
# closed forms (X has shape (n, dim))
# --------------------------------------------------------------------------


def _branin01(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (x2 - 5.1 / (4 * PI ** 2) * x1 ** 2 + 5 * x1 / PI - 6) ** 2 + 10 * (1 - 1 / (8 * PI)) * np.cos(x1) + 10


def _branin02(X):
    x1, x2 = X[:, 0], X[:, 1]
    return ((x2 - 5.1 / (4 * PI ** 2) * x1 ** 2 + 5 * x1 / PI - 6) ** 2
            + 10 * (1 - 1 / (8 * PI)) * np.cos(x1) * np.cos(x2) + np.log(x1 ** 2 + x2 ** 2 + 1) + 10)


def _beale(X):
    x1, x2 = X[:, 0], X[:, 1]
    return ((1.5 - x1 + x1 * x2) ** 2 + (2.25 - x1 + x1 * x2 ** 2) ** 2
            + (2.625 - x1 + x1 * x2 ** 3) ** 2)


_HART_A = np.array([[10, 3, 17, 3.5, 1.7, 8],
                    [0.05, 10, 17, 0.1, 8, 14],
                    [3, 3.5, 1.7, 10, 17, 8],
                    [17, 8, 0.05, 10, 0.1, 14]])
_HART_P = 1e-4 * np.array([[1312, 1696, 5569, 124, 8283, 5886],
                           [2329, 4135, 8307, 3736, 1004, 9991],
                           [2348, 1451, 3522, 2883, 3047, 6650],
                           [4047, 8828, 8732, 5743, 1091, 381]])
_HART_C = np.array([1.0, 1.2, 3.0, 3.2])


def _hartmann6(X):
    d = np.einsum("kj,nkj->nk", _HART_A, (X[:, None, :] - _HART_P[None]) ** 2)
    return -np.exp(-d) @ _HART_C


def _griewank(X):
    i = np.arange(1, X.shape[1] + 1)
    return 1 + np.sum(X ** 2, axis=1) / 4000 - np.prod(np.cos(X / np.sqrt(i)), axis=1)


def _shubert01(X):
    j = np.arange(1, 6)
    terms = np.sum(j * np.cos((j + 1) * X[..., None] + j), axis=-1)
    return np.prod(terms, axis=1)


def _levy13(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (np.sin(3 * PI * x1) ** 2 + (x1 - 1) ** 2 * (1 + np.sin(3 * PI * x2) ** 2)
            + (x2 - 1) ** 2 * (1 + np.sin(2 * PI * x2) ** 2))


def _ackley(X):
    d = X.shape[1]
    return (-20 * np.exp(-0.2 * np.sqrt(np.sum(X ** 2, axis=1) / d))
            - np.exp(np.sum(np.cos(TWO_PI * X), axis=1) / d) + 20 + math.e)


def _cross_in_tray(X):
    x1, x2 = X[:, 0], X[:, 1]
    inner = np.abs(np.sin(x1) * np.sin(x2) * np.exp(np.abs(100 - np.sqrt(x1 ** 2 + x2 ** 2) / PI)))
    return -0.0001 * (inner + 1) ** 0.1


def _holder_table(X):
    x1, x2 = X[:, 0], X[:, 1]
    return -np.abs(np.sin(x1) * np.cos(x2) * np.exp(np.abs(1 - np.sqrt(x1 ** 2 + x2 ** 2) / PI)))


def _exponential(X):
    return -np.exp(-0.5 * np.sum(X ** 2, axis=1))


_WEI_K = np.arange(21)
_WEI_AK = 0.5 ** _WEI_K
_WEI_BK = 3.0 ** _WEI_K


def _weierstrass(X):
    d = X.shape[1]
    offset = d * np.sum(_WEI_AK * np.cos(PI * _WEI_BK))
    per_coord = np.cos(TWO_PI * _WEI_BK * (X[..., None] + 0.5)) @ _WEI_AK
    return np.sum(per_coord - offset, axis=1)


def _deflected_corrugated_spring(X):
    sq = np.sum((X - 5.0) ** 2, axis=1)
    return -np.cos(5.0 * np.sqrt(sq)) + 0.1 * sq


def _cosine_mixture(X):
    return 0.1 * np.sum(np.cos(5 * PI * X), axis=1) + np.sum(X ** 2, axis=1)


def _drop_wave(X):
    sq = np.sum(X ** 2, axis=1)
    return -(1 + np.cos(12 * np.sqrt(sq))) / (0.5 * sq + 2)


def _at(fn, point):
    return float(fn(np.asarray(point, dtype=float)[None, :])[0])


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------


def _fixed(name, fn, domain, fmin, fmax, props):
    def make(dim=None):
        if dim is not None and dim != len(domain):
            raise ParameterError(f"{name} is only defined in {len(domain)}D")
        return Benchmark(name, len(domain), domain, fn, fmin, fmax, props)
    return make


def _scalable(name, fn, lo, hi, default_dim, extrema, props):
    def make(dim=None):
        d = default_dim if dim is None else int(dim)
        if d < 1:
            raise ParameterError("dim must be >= 1")
        fmin, fmax = extrema(d)
        label = name if d == default_dim else f"{name}:{d}"
        return Benchmark(label, d, [(lo, hi)] * d, fn, fmin, fmax, props)
    return make


def corrupt(base: Benchmark, f_min: float | None = None, f_max: float | None = None,
            params: CorruptionParams = SMALL_CORRUPTION, name: str | None = None,
            known_min: float | None = None, known_max: float | None = None) -> Benchmark:
    """Add ``(f_max - f_min) * max_d corruption(normalized x_d)`` to a benchmark.

    ``f_min``/``f_max`` default to the base benchmark's known extrema. The
    new benchmark's extrema default to the base ones plus the corruption's
    amplitude bound; pass ``known_min``/``known_max`` to override.
    """
    f_min = base.known_min if f_min is None else float(f_min)
    f_max = base.known_max if f_max is None else float(f_max)
    f_range = f_max - f_min
    lower, span = base.lower, base.upper - base.lower
    base_eval = base.evaluator

    def evaluator(X):
        U = np.clip((X - lower) / span, 0.0, 1.0)
        return base_eval(X) + f_range * np.max(corruption(U, params), axis=-1)

    bound = abs(f_range) * params.amplitude_bound
    return Benchmark(
        name or f"Corrupted{base.name}",
        base.dim,
        base.domain,
        evaluator,
        base.known_min - bound if known_min is None else known_min,
        base.known_max + bound if known_max is None else known_max,
        base.properties,
    )


_EXP_FMAX_8 = -math.exp(-0.5 * 8 * 0.49)

_CATALOG = {
    "Branin01": _fixed("Branin01", _branin01, [(-5, 10), (0, 15)],
                       0.39788735772973816, 308.129096012, ("none",)),
    "Branin02": _fixed("Branin02", _branin02, [(-5, 15), (-5, 15)],
                       5.559037, 506.983390872, ("none",)),
    "Beale": _fixed("Beale", _beale, [(-4.5, 4.5)] * 2, 0.0, 181853.613281, ("boring",)),
    "Hartmann6": _fixed("Hartmann6", _hartmann6, [(0, 1)] * 6, -3.32236801141551, 0.0, ("boring",)),
    "Griewank": _fixed("Griewank", _griewank, [(-50, 20)] * 2, 0.0, 3.187696592840877, ("oscillatory",)),
    "Shubert01": _fixed("Shubert01", _shubert01, [(-10, 10)] * 2, -186.7309, 210.448484805,
                        ("oscillatory",)),
    "Levy13": _fixed("Levy13", _levy13, [(-10, 10)] * 2, 0.0, 454.12864891174, ("oscillatory",)),
    "Ackley": _scalable("Ackley", _ackley, -10.0, 30.0, 2, lambda d: (0.0, 22.26946404462),
                        ("complicated", "oscillatory")),
    "CrossInTray": _fixed("CrossInTray", _cross_in_tray, [(-10, 10)] * 2,
                          -2.062611870822739, -0.25801263059, ("complicated", "oscillatory")),
    "HolderTable": _fixed("HolderTable", _holder_table, [(-10, 10)] * 2,
                          -19.20850256788675, 0.0, ("complicated", "oscillatory")),
    "Exponential": _scalable("Exponential", _exponential, -0.7, 0.2, 8,
                             lambda d: (-1.0, _at(_exponential, [-0.7] * d)), ("none",)),
    "Weierstrass": _scalable("Weierstrass", _weierstrass, -0.5, 0.2, 8,
                             lambda d: (_at(_weierstrass, [0.0] * d), _at(_weierstrass, [-0.5] * d)),
                             ("complicated",)),
    "DeflectedCorrugatedSpring": _scalable(
        "DeflectedCorrugatedSpring", _deflected_corrugated_spring, 0.0, 7.5, 10,
        lambda d: (_at(_deflected_corrugated_spring, [5.0] * d), _at(_deflected_corrugated_spring, [0.0] * d)),
        ("oscillatory",)),
    "CosineMixture": _scalable("CosineMixture", _cosine_mixture, -1.0, 1.0, 10,
                               lambda d: (-0.063012202176250 * d, 0.9 * d), ("oscillatory",)),
    "DropWave": _scalable("DropWave", _drop_wave, -2.0, 5.12, 10, lambda d: (-1.0, 0.0), ("oscillatory",)),
}


# Re-estimated with estimate_extrema(b, 1_000_000, seed=0), the same
# procedure used for the published corrupted minima.
CORRUPTED_EXTREMA = {
    "CorruptedHolderTable": (-20.53563135417105, 2.3859099245119184),
    "CorruptedExponential": (-0.9853185221244521, 0.04954863594623812),
}


def _corrupted_holder_table(dim=None):
    lo, hi = CORRUPTED_EXTREMA["CorruptedHolderTable"]
    return corrupt(_CATALOG["HolderTable"](dim), params=SMALL_CORRUPTION, name="CorruptedHolderTable",
                   known_min=lo, known_max=hi)


def _corrupted_exponential(dim=None):
    base = _CATALOG["Exponential"](dim)
    if base.dim == 8:
        lo, hi = CORRUPTED_EXTREMA["CorruptedExponential"]
        return corrupt(base, params=LARGE_CORRUPTION, name="CorruptedExponential", known_min=lo, known_max=hi)
    return corrupt(base, params=LARGE_CORRUPTION, name=f"CorruptedExponential:{base.dim}")


_CATALOG["CorruptedHolderTable"] = _corrupted_holder_table
_CATALOG["CorruptedExponential"] = _corrupted_exponential

_CORRUPTED_PROPS = ("complicated", "oscillatory")

# Entries that appear in the result tables (Powell Triple Log, Cosine Mixture and
# Drop-Wave are listed for completeness only).
RESULT_BENCHMARKS = (
    "Hartmann6", "Griewank", "Shubert01", "Ackley", "Ackley:6", "CrossInTray", "HolderTable",
    "CorruptedHolderTable", "Branin01", "Branin02", "Beale", "Levy13", "DeflectedCorrugatedSpring",
    "Weierstrass", "CorruptedExponential",
)


# names used in the published tables, where they differ from catalog keys
TABLE_LABELS = {"Hartmann6": "Hartmann"}
_ALIASES = {label: key for key, label in TABLE_LABELS.items()}


def benchmark_names() -> list[str]:
    """Catalog keys in a stable order."""
    return list(_CATALOG)


def get_benchmark(name: str) -> Benchmark:
    """Look up a benchmark; ``"Name:d"`` selects dimension ``d`` for scalable ones."""
    base, _, dim = name.partition(":")
    base = _ALIASES.get(base, base)
    if base not in _CATALOG:
        raise KeyError(f"unknown benchmark {name!r}; available: {benchmark_names()}")
    b = _CATALOG[base](int(dim) if dim else None)
    if base.startswith("Corrupted"):
        b = Benchmark(b.name, b.dim, b.domain, b.evaluator, b.known_min, b.known_max, _CORRUPTED_PROPS)
    return b


def eval_benchmark(name: str, x) -> float:
    return get_benchmark(name)(x)


def estimate_extrema(b: Benchmark, n_samples: int = 1_000_000, seed: int = 0, chunk: int = 200_000):
    """Min and max over ``n_samples`` uniform draws from the domain."""
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    lo, span = b.lower, b.upper - b.lower
    fmin, fmax = math.inf, -math.inf
    remaining = n_samples
    while remaining > 0:
        m = min(chunk, remaining)
        X = lo + span * rng.uniform(size=(m, b.dim))
        vals = b.evaluator(X)
        fmin = min(fmin, float(np.min(vals)))
        fmax = max(fmax, float(np.max(vals)))
        remaining -= m
    return fmin, fmax
