"""Matérn 5/2 kernel over augmented (x, h) inputs and stabilized Cholesky solves.

All routines are pure functions of their arguments. Points are rows of a
2-D array whose columns are the domain coordinates followed by the latent
coordinates; a single shared lengthscale applies to every column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NumericalError, ParameterError, StructuralError

SQRT5 = math.sqrt(5.0)
MAX_JITTER = 1e-4
BASE_JITTER = 1e-10


@dataclass(frozen=True)
class KernelParams:
    lengthscale: float = 1.0
    signal_variance: float = 1.0

    def __post_init__(self):
        for name in ("lengthscale", "signal_variance"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class AugmentedInput:
    """A point in the product space X x H.

    ``x`` lives in the unit hypercube; ``h`` holds the latent coordinates
    (all zeros for surrogates without latent inputs).
    """

    x: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if x.ndim != 1 or h.ndim != 1:
            raise StructuralError("x and h must be vectors")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ParameterError("x must lie in the unit hypercube")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "h", h)

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([self.x, self.h])


@dataclass(frozen=True)
class CovMatrix:
    """Covariance matrix with its diagonal jitter already included in ``entries``."""

    entries: np.ndarray
    jitter: float = 0.0


def _check_params(params: KernelParams):
    if not isinstance(params, KernelParams):
        raise ParameterError("expected KernelParams")


def matern52_scaled(s):
    """Unit-variance Matérn 5/2 profile as a function of ``s = sqrt(5) r / l``."""
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


def matern52(r, params: KernelParams = KernelParams()):
    """Matérn 5/2 covariance at distance ``r`` (scalar or array)."""
    _check_params(params)
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ParameterError("distance must be finite")
    if np.any(r < 0):
        raise ParameterError("distance must be nonnegative")
    out = params.signal_variance * matern52_scaled(SQRT5 * r / params.lengthscale)
    return float(out) if out.ndim == 0 else out


def matern52_dr(r, params: KernelParams = KernelParams()):
    """Derivative dk/dr of the Matérn 5/2 kernel."""
    r = np.asarray(r, dtype=float)
    ell = params.lengthscale
    s = SQRT5 * r / ell
    return -(5.0 * params.signal_variance * r / (3.0 * ell * ell)) * (1.0 + s) * np.exp(-s)


def as_points(points) -> np.ndarray:
    """Stack a list of AugmentedInput (or pass through a 2-D array) into rows."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
        if arr.ndim != 2:
            raise StructuralError("point array must be 2-D")
        return arr
    points = list(points)
    if not points:
        return np.zeros((0, 0))
    q = {p.x.shape[0] for p in points}
    d = {p.h.shape[0] for p in points}
    if len(q) != 1 or len(d) != 1:
        raise StructuralError("all points must share the same x and h dimensions")
    return np.stack([p.coords for p in points])


def sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of A and B."""
    if A.shape[1] != B.shape[1]:
        raise StructuralError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kernel_matrix(A: np.ndarray, B: np.ndarray, lengthscale: float,
                  signal_variance: float = 1.0) -> np.ndarray:
    """Cross-covariance between two row sets (no jitter)."""
    r = np.sqrt(sq_distances(A, B))
    return signal_variance * matern52_scaled(SQRT5 * r / lengthscale)


def cov_matrix(points, params: KernelParams, jitter: float = 0.0) -> CovMatrix:
    """Covariance matrix over ``points`` with ``jitter`` on the diagonal."""
    _check_params(params)
    if jitter < 0 or not np.isfinite(jitter):
        raise ParameterError("jitter must be nonnegative")
    P = as_points(points)
    K = kernel_matrix(P, P, params.lengthscale, params.signal_variance)
    K[np.diag_indices_from(K)] += jitter
    return CovMatrix(K, float(jitter))


def base_jitter(n: int) -> float:
    return BASE_JITTER * max(n, 1)


def stable_cholesky(A: np.ndarray, jitter: float, escalate: bool = True):
    """Lower Cholesky factor of ``A + jitter*I``.

    On failure the jitter is raised by x10 (starting at ``base_jitter(n)``
    if it was below that) until ``MAX_JITTER``. With ``escalate=False`` a
    single attempt is made.

    Returns
    -------
    L : ndarray
    jitter : float
        The jitter actually used.
    """
    n = A.shape[0]
    current = float(jitter)
    while True:
        M = A if current == 0.0 else A + current * np.eye(n)
        try:
            L = linalg.cholesky(M, lower=True, check_finite=False)
            if np.all(np.isfinite(L)):
                return L, current
        except linalg.LinAlgError:
            pass
        if not escalate or current >= MAX_JITTER:
            raise NumericalError("Cholesky factorization failed", current)
        current = min(max(current * 10.0, base_jitter(n)), MAX_JITTER)


def cholesky_solve(K: CovMatrix, rhs) -> np.ndarray:
    """Solve ``K x = rhs`` through a Cholesky factor and two triangular solves.

    ``K.entries`` already carries ``K.jitter``. When ``K.jitter`` is positive
    and the factorization fails, extra jitter is added with x10 escalation up
    to 1e-4; a zero jitter requests an exact factorization with no escalation.
    """
    A = np.asarray(K.entries, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != rhs.shape[0]:
        raise StructuralError("incompatible shapes for solve")
    escalate = K.jitter > 0
    try:
        L, _ = stable_cholesky(A, 0.0, escalate=False)
    except NumericalError:
        if not escalate:
            raise
        L, _ = stable_cholesky(A, K.jitter * 10.0)
    y = linalg.solve_triangular(L, rhs, lower=True, check_finite=False)
    return linalg.solve_triangular(L.T, y, lower=False, check_finite=False)


def kernel_grad_wrt_input(p_i, p_j, params: KernelParams = KernelParams()) -> np.ndarray:
    """Gradient of k(p_i, p_j) with respect to the coordinates of ``p_i``.

    Uses dk/dr (p_i - p_j)/r, which simplifies to a form without 1/r, so the
    gradient at coincident points is exactly zero.
    """
    _check_params(params)
    a = p_i.coords if isinstance(p_i, AugmentedInput) else np.asarray(p_i, dtype=float)
    b = p_j.coords if isinstance(p_j, AugmentedInput) else np.asarray(p_j, dtype=float)
    if a.shape != b.shape:
        raise StructuralError("points must share dimension")
    diff = a - b
    ell = params.lengthscale
    s = SQRT5 * math.sqrt(float(diff @ diff)) / ell
    return -(5.0 * params.signal_variance / (3.0 * ell * ell)) * (1.0 + s) * math.exp(-s) * diff
