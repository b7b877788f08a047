"""GP surrogate families: noiseless, homoscedastic, heteroscedastic and latent-input (LGP).

Every family shares a zero-mean GP prior with a Matérn 5/2 kernel of unit
signal variance over standardized outputs. They differ in what is added to
the training covariance:

* ``gp``              -- nothing beyond a tiny jitter,
* ``homoscedastic``   -- one noise variance on the whole diagonal,
* ``heteroscedastic`` -- one noise variance per observation,
* ``lgp``             -- no noise; instead each observation gets a latent
  input ``h_n ~ N(0, sigma_h^2 I)`` appended to its ``x_n``.

Positive parameters carry LogNormal(0, 1) priors. Samplers work on the
unconstrained vector ``[log l, ...]`` described in :func:`param_vector`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .errors import NumericalError, ParameterError, StructuralError
from .kernel_core import (
    MAX_JITTER,
    SQRT5,
    KernelParams,
    base_jitter,
    kernel_matrix,
    stable_cholesky,
)

LOG_2PI = math.log(2.0 * math.pi)
_MAX_LOG_PARAM = 700.0


class Variant(str, Enum):
    GP = "gp"
    HOMOSCEDASTIC = "homoscedastic"
    HETEROSCEDASTIC = "heteroscedastic"
    LGP = "lgp"


def as_variant(value) -> Variant:
    try:
        return Variant(value)
    except ValueError:
        raise StructuralError(
            f"unknown surrogate {value!r}; expected one of {[v.value for v in Variant]}"
        ) from None


def standardize(F_raw):
    """Zero-mean, unit-variance transform using the population standard deviation.

    Returns ``(F, mean_shift, scale)``; constant or single-value inputs use
    ``scale = 1``.
    """
    F_raw = np.asarray(F_raw, dtype=float).ravel()
    if F_raw.size == 0:
        return F_raw.copy(), 0.0, 1.0
    shift = float(np.mean(F_raw))
    scale = float(np.std(F_raw))
    if not scale > 0.0:
        scale = 1.0
    return (F_raw - shift) / scale, shift, scale


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    F_raw: np.ndarray
    F: np.ndarray
    mean_shift: float
    scale: float

    @classmethod
    def from_raw(cls, X, F_raw) -> "Dataset":
        X = np.asarray(X, dtype=float)
        F_raw = np.asarray(F_raw, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != F_raw.shape[0]:
            raise StructuralError("X must be N x Q with one output per row")
        if np.any(X < 0.0) or np.any(X > 1.0):
            raise StructuralError("inputs must be rescaled to the unit hypercube")
        F, shift, scale = standardize(F_raw)
        return cls(X, F_raw, F, shift, scale)

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls.from_raw(np.zeros((0, dim)), np.zeros(0))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def unstandardize(self, values):
        return np.asarray(values) * self.scale + self.mean_shift


@dataclass(frozen=True)
class SurrogateSample:
    """One posterior draw of a surrogate's parameters."""

    kernel: KernelParams
    noise_variance: float | None = None
    noise_variances: np.ndarray | None = None
    H: np.ndarray | None = None
    sigma_h: float | None = None


@dataclass(frozen=True)
class PredictiveMoments:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(max(self.variance, 0.0))


def _check_sample(variant: Variant, data: Dataset, sample: SurrogateSample):
    n = data.n
    if variant is Variant.HOMOSCEDASTIC:
        if sample.noise_variance is None or not sample.noise_variance > 0:
            raise StructuralError("homoscedastic sample needs a positive noise_variance")
    elif variant is Variant.HETEROSCEDASTIC:
        nv = sample.noise_variances
        if nv is None or np.shape(nv) != (n,) or not np.all(np.asarray(nv) > 0):
            raise StructuralError("heteroscedastic sample needs N positive noise_variances")
    elif variant is Variant.LGP:
        if sample.H is None or sample.sigma_h is None:
            raise StructuralError("LGP sample needs H and sigma_h")
        H = np.asarray(sample.H)
        if H.ndim != 2 or H.shape[0] != n:
            raise StructuralError("H must have one row per data point")
        if sample.sigma_h < 0:
            raise StructuralError("sigma_h must be nonnegative")
        if sample.sigma_h == 0 and np.any(H != 0):
            raise StructuralError("sigma_h = 0 requires H identically zero")


def augmented_inputs(variant: Variant, data: Dataset, sample: SurrogateSample) -> np.ndarray:
    """Training rows (x_n, h_n) for LGP, plain x_n otherwise."""
    if variant is Variant.LGP:
        return np.hstack([data.X, np.asarray(sample.H, dtype=float)])
    return data.X


def _noise_diagonal(variant: Variant, data: Dataset, sample: SurrogateSample) -> np.ndarray | None:
    if variant is Variant.HOMOSCEDASTIC:
        return np.full(data.n, float(sample.noise_variance))
    if variant is Variant.HETEROSCEDASTIC:
        return np.asarray(sample.noise_variances, dtype=float)
    return None


def _fill_symmetric(lower: np.ndarray) -> np.ndarray:
    # the strict upper triangle is zero on input
    out = lower + lower.T
    out.flat[::out.shape[0] + 1] *= 0.5
    return out


def _factor(K: np.ndarray, n: int):
    """Cholesky with the same jitter ladder as ``stable_cholesky``."""
    jitter = base_jitter(n)
    while True:
        M = K.copy()
        M.flat[::n + 1] += jitter
        L, info = lapack.dpotrf(M, lower=1, clean=1, overwrite_a=1)
        if info == 0 and math.isfinite(np.diagonal(L).sum()):
            return L
        if jitter >= MAX_JITTER:
            raise NumericalError("Cholesky factorization failed", jitter)
        jitter = min(jitter * 10.0, MAX_JITTER)


class DensityTarget:
    """Unconstrained log density (and gradient) of one surrogate on fixed data.

    Squared input distances are computed once; each call only adds the latent
    part and refactors. The parameter layout is that of :func:`param_vector`.
    """

    def __init__(self, variant, data: Dataset, sigma_h: float | None = None,
                 latent_dim: int = 1, signal_variance: float = 1.0):
        self.variant = as_variant(variant)
        self.n = data.n
        self.F = data.F
        self.sv = float(signal_variance)
        if self.variant is Variant.LGP:
            if sigma_h is None:
                raise StructuralError("LGP needs sigma_h")
            if sigma_h < 0:
                raise StructuralError("sigma_h must be nonnegative")
        self.sigma_h = None if sigma_h is None else float(sigma_h)
        self.latent_dim = int(latent_dim)
        self.latent = self.variant is Variant.LGP and self.sigma_h > 0
        self.size = {
            Variant.GP: 1,
            Variant.HOMOSCEDASTIC: 2,
            Variant.HETEROSCEDASTIC: 1 + self.n,
        }.get(self.variant, 1 + self.n * self.latent_dim if self.latent else 1)
        r2 = np.zeros((self.n, self.n))
        for col in data.X.T:
            d = col[:, None] - col[None, :]
            r2 += d * d
        self.r2_x = r2

    def __call__(self, theta, want_grad: bool = True):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise StructuralError(f"expected {self.size} parameters, got {theta.shape}")
        n, sv, variant = self.n, self.sv, self.variant
        u_ell = theta[0]
        # exp over- or underflows beyond this
        if not abs(u_ell) < _MAX_LOG_PARAM or (variant is Variant.HOMOSCEDASTIC
                                               and not abs(theta[1]) < _MAX_LOG_PARAM):
            raise ParameterError("log parameter out of range")
        ell = math.exp(u_ell)
        logs = theta[:1] if variant is Variant.LGP or variant is Variant.GP else theta
        # LogNormal(0,1) prior plus log-Jacobian: standard normal in log space
        value = float(-0.5 * logs @ logs - 0.5 * logs.size * LOG_2PI)
        H = None
        if self.latent:
            H = theta[1:].reshape(n, self.latent_dim)
            sh2 = self.sigma_h ** 2
            value += float(-0.5 * np.sum(H * H) / sh2 - 0.5 * H.size * (LOG_2PI + math.log(sh2)))

        if n:
            r2 = self.r2_x
            if H is not None:
                r2 = r2.copy()
                for col in H.T:
                    d = col[:, None] - col[None, :]
                    r2 += d * d
            s = np.sqrt(r2)
            s *= SQRT5 / ell
            E = np.exp(-s)
            one_s = 1.0 + s
            t1 = one_s * E
            s2_3E = s * s
            s2_3E *= E
            s2_3E /= 3.0
            K = t1 + s2_3E
            if sv != 1.0:
                K *= sv
            if variant is Variant.HOMOSCEDASTIC:
                K.flat[::n + 1] += math.exp(theta[1])
            elif variant is Variant.HETEROSCEDASTIC:
                K.flat[::n + 1] += np.exp(theta[1:])
            L = _factor(K, n)
            alpha, _ = lapack.dpotrs(L, self.F, lower=1)
            value += float(-0.5 * self.F @ alpha - np.sum(np.log(np.diagonal(L))) - 0.5 * n * LOG_2PI)
        if not want_grad:
            return value, None

        grad = np.empty(self.size)
        if n:
            inv, info = lapack.dpotri(L, lower=1)
            if info != 0:
                Kinv = linalg.cho_solve((L, True), np.eye(n), check_finite=False)
            else:
                Kinv = _fill_symmetric(inv)
            W = np.outer(alpha, alpha)
            W -= Kinv
            # dK/dlog l = sv (s^2/3)(1 + s) e^-s
            grad[0] = 0.5 * sv * float(np.vdot(W, s2_3E * one_s)) - u_ell
        else:
            grad[0] = -u_ell
        if variant is Variant.HOMOSCEDASTIC:
            tr = float(np.trace(W)) if n else 0.0
            grad[1] = 0.5 * math.exp(theta[1]) * tr - theta[1]
        elif variant is Variant.HETEROSCEDASTIC:
            dW = np.diagonal(W) if n else np.zeros(0)
            grad[1:] = 0.5 * np.exp(theta[1:]) * dW - theta[1:]
        elif H is not None:
            if n:
                # dk/dp_i = G_ij (p_i - p_j), G = -(5 sv / 3 l^2)(1 + s) e^-s
                WG = W * t1
                WG *= -(5.0 * sv / (3.0 * ell * ell))
                gH = H * WG.sum(axis=1)[:, None] - WG @ H
            else:
                gH = np.zeros_like(H)
            gH -= H / self.sigma_h ** 2
            grad[1:] = gH.ravel()
        return value, grad


def _log_jacobian(variant: Variant, sample: SurrogateSample) -> float:
    out = math.log(sample.kernel.lengthscale)
    if variant is Variant.HOMOSCEDASTIC:
        out += math.log(sample.noise_variance)
    elif variant is Variant.HETEROSCEDASTIC:
        out += float(np.sum(np.log(sample.noise_variances)))
    return out


def _sample_target(variant, data: Dataset, sample: SurrogateSample):
    variant = as_variant(variant)
    _check_sample(variant, data, sample)
    latent_dim = np.asarray(sample.H).shape[1] if variant is Variant.LGP else 1
    target = DensityTarget(variant, data, sample.sigma_h, latent_dim, sample.kernel.signal_variance)
    return variant, target, param_vector(variant, sample)


def log_joint(variant, data: Dataset, sample: SurrogateSample) -> float:
    """log N(F | 0, K) + log p(latent state) + log p(theta), on the natural scale."""
    variant, target, theta = _sample_target(variant, data, sample)
    value, _ = target(theta, want_grad=False)
    return value - _log_jacobian(variant, sample)


def log_joint_grad(variant, data: Dataset, sample: SurrogateSample) -> np.ndarray:
    """Gradient of the unconstrained log density at ``param_vector(variant, sample)``.

    The unconstrained density is :func:`log_joint` plus the log-Jacobian of
    the exp transform on every positive parameter.
    """
    _, target, theta = _sample_target(variant, data, sample)
    return target(theta, want_grad=True)[1]


def param_vector(variant, sample: SurrogateSample) -> np.ndarray:
    """Unconstrained coordinates of a sample.

    ``gp``: [log l]; ``homoscedastic``: [log l, log s2];
    ``heteroscedastic``: [log l, log s2_1..N]; ``lgp``: [log l, H.ravel()]
    (just [log l] when sigma_h is 0, since H is then pinned at zero).
    """
    variant = as_variant(variant)
    parts = [np.array([math.log(sample.kernel.lengthscale)])]
    if variant is Variant.HOMOSCEDASTIC:
        parts.append(np.array([math.log(sample.noise_variance)]))
    elif variant is Variant.HETEROSCEDASTIC:
        parts.append(np.log(np.asarray(sample.noise_variances, dtype=float)))
    elif variant is Variant.LGP and sample.sigma_h > 0:
        parts.append(np.asarray(sample.H, dtype=float).ravel())
    return np.concatenate(parts)


def sample_from_vector(variant, theta, n: int, latent_dim: int = 1,
                       sigma_h: float | None = None) -> SurrogateSample:
    """Inverse of :func:`param_vector`."""
    variant = as_variant(variant)
    theta = np.asarray(theta, dtype=float)
    kernel = KernelParams(lengthscale=math.exp(theta[0]))
    if variant is Variant.GP:
        expected = 1
        sample = SurrogateSample(kernel)
    elif variant is Variant.HOMOSCEDASTIC:
        expected = 2
        sample = SurrogateSample(kernel, noise_variance=math.exp(theta[1]))
    elif variant is Variant.HETEROSCEDASTIC:
        expected = 1 + n
        sample = SurrogateSample(kernel, noise_variances=np.exp(theta[1:]))
    else:
        if sigma_h is None:
            raise StructuralError("LGP needs sigma_h")
        if sigma_h > 0:
            expected = 1 + n * latent_dim
            H = theta[1:].reshape(n, latent_dim)
        else:
            expected = 1
            H = np.zeros((n, latent_dim))
        sample = SurrogateSample(kernel, H=H, sigma_h=float(sigma_h))
    if theta.shape != (expected,):
        raise StructuralError(f"expected {expected} parameters, got {theta.shape}")
    return sample


def log_density(variant, data: Dataset, theta, sigma_h: float | None = None,
                latent_dim: int = 1) -> float:
    """Unconstrained log density at parameter vector ``theta``."""
    return DensityTarget(variant, data, sigma_h, latent_dim)(theta, want_grad=False)[0]


def log_density_and_grad(variant, data: Dataset, theta, sigma_h: float | None = None,
                         latent_dim: int = 1):
    return DensityTarget(variant, data, sigma_h, latent_dim)(theta, want_grad=True)


@dataclass
class ConditionedGP:
    """A surrogate sample conditioned on training data, ready for batch prediction.

    Predictions are of the noise-free latent function at ``(x*, h* = 0)``.
    """

    points: np.ndarray
    lengthscale: float
    signal_variance: float
    chol: np.ndarray
    alpha: np.ndarray
    latent_dim: int = 0
    jitter: float = field(default=0.0)

    def predict(self, Xq):
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if self.latent_dim:
            Xq = np.hstack([Xq, np.zeros((Xq.shape[0], self.latent_dim))])
        if self.points.shape[0] == 0:
            return np.zeros(Xq.shape[0]), np.full(Xq.shape[0], self.signal_variance)
        Ks = kernel_matrix(Xq, self.points, self.lengthscale, self.signal_variance)
        mean = Ks @ self.alpha
        v = linalg.solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
        var = self.signal_variance - np.einsum("ij,ij->j", v, v)
        return mean, np.maximum(var, 0.0)


def condition(variant, data: Dataset, sample: SurrogateSample) -> ConditionedGP:
    variant = as_variant(variant)
    _check_sample(variant, data, sample)
    P = augmented_inputs(variant, data, sample)
    ell = sample.kernel.lengthscale
    sv = sample.kernel.signal_variance
    latent_dim = P.shape[1] - data.dim
    n = data.n
    if n == 0:
        return ConditionedGP(P, ell, sv, np.zeros((0, 0)), np.zeros(0), latent_dim)
    K = kernel_matrix(P, P, ell, sv)
    noise = _noise_diagonal(variant, data, sample)
    if noise is not None:
        K[np.diag_indices(n)] += noise
    L, jit = stable_cholesky(K, base_jitter(n))
    alpha = linalg.cho_solve((L, True), data.F, check_finite=False)
    return ConditionedGP(P, ell, sv, L, alpha, latent_dim, jit)


def predict(variant, data: Dataset, sample: SurrogateSample, x_star) -> PredictiveMoments:
    """Predictive moments of the noise-free function at a single query point."""
    mean, var = condition(variant, data, sample).predict(np.atleast_1d(x_star)[None, :])
    return PredictiveMoments(float(mean[0]), float(var[0]))
