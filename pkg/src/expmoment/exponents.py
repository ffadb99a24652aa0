"""Asymptotic exponents of exponential moments for memoryless sources.

The central object is ``max_Q [alpha * lam(Q) - D(Q||P)]`` where ``lam(Q)``
is the per-symbol cost a universal strategy achieves on type class ``Q``.
Closed forms cover lossless coding (Renyi entropy), guessing with a key of
rate R, and the random-code lossy exponent on a binary symmetric source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp, xlogy

from .probability import (
    FiniteDistribution,
    as_distribution,
    binary_entropy,
    binary_entropy_inverse,
    entropy,
    kl_divergence,
    renyi_entropy,
)
from .strategy_core import _kl_rows, compositions, simplex_grid

LN2 = math.log(2.0)
# root-finding probes need only the sign; near the critical slope the
# iteration converges sublinearly
_PROBE_ITER = 1000
KINDS = ("shannon_entropy", "guessing_min", "rate_distortion", "distortion_rate")


# ---------------------------------------------------------------------------
# rate-distortion primitives
# ---------------------------------------------------------------------------


class RDPoint(NamedTuple):
    R: float
    D: float
    iterations: int
    converged: bool


def _check_distortion(d_matrix) -> np.ndarray:
    d = np.asarray(d_matrix, dtype=float)
    if d.ndim != 2:
        raise ValueError("distortion matrix must be 2-D")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("distortion entries must be finite and nonnegative")
    if not np.all((d == 0).any(axis=1)):
        raise ValueError("every source symbol needs a zero-distortion reproduction")
    return d


def hamming(m: int) -> np.ndarray:
    return 1.0 - np.eye(m)


def blahut_arimoto_rd(
    q,
    d_matrix,
    slope: float,
    max_iter: int = 100_000,
    tol: float = 1e-13,
    r0: Optional[np.ndarray] = None,
) -> RDPoint:
    """One point of the rate-distortion curve of ``q``.

    ``slope`` is the magnitude of the distortion-rate slope, ``-dD/dR``; it is
    the reciprocal of the usual Lagrange multiplier.  ``slope = 0`` selects the
    lossless end, where the test channel is confined to zero-distortion
    reproductions.
    """
    q = as_distribution(q).probs
    d = _check_distortion(d_matrix)
    if d.shape[0] != q.size:
        raise ValueError("distortion matrix rows must match the source alphabet")
    if slope < 0:
        raise ValueError("slope must be nonnegative")
    if slope == 0:
        log_kernel = np.where(d == 0, 0.0, -np.inf)
    else:
        log_kernel = -d / slope
    r = np.full(d.shape[1], 1.0 / d.shape[1]) if r0 is None else np.asarray(r0, float)
    # the linear-domain kernel is safe while exp(-d / slope) cannot underflow
    linear = slope > 0 and float(d.max()) / slope < 500.0
    kernel = np.exp(log_kernel) if linear else None
    converged = False
    it = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            if linear:
                w = r[None, :] * kernel
                w /= w.sum(axis=1, keepdims=True)
            else:
                log_w = np.log(r)[None, :] + log_kernel
                log_w -= logsumexp(log_w, axis=1, keepdims=True)
                w = np.exp(log_w)
            r_new = q @ w
            delta = np.max(np.abs(r_new - r))
            r = r_new
            if delta < tol:
                converged = True
                break
        log_w = np.log(r)[None, :] + log_kernel
        log_w -= logsumexp(log_w, axis=1, keepdims=True)
        w = np.exp(log_w)
        out = q @ w
        joint = q[:, None] * w
        ratio = np.where(joint > 0, log_w - np.log(np.where(out > 0, out, 1.0))[None, :], 0.0)
    rate = max(float(np.sum(joint * ratio)), 0.0)
    dist = float(np.sum(joint * d))
    return RDPoint(rate, dist, it, converged)


def _max_distortion(q: np.ndarray, d: np.ndarray) -> float:
    return float(np.min(q @ d))


def rate_distortion(q, d_matrix, D: float, tol: float = 1e-12) -> float:
    """R_q(D) through Blahut-Arimoto and root finding on the slope."""
    q = as_distribution(q).probs
    d = _check_distortion(d_matrix)
    if D < 0:
        raise ValueError("distortion must be nonnegative")
    if D >= _max_distortion(q, d):
        return 0.0
    if D == 0:
        return blahut_arimoto_rd(q, d, 0.0).R

    def excess(log_slope):
        return blahut_arimoto_rd(q, d, math.exp(log_slope), max_iter=_PROBE_ITER).D - D

    lo, hi = -6.0, 1.0
    while excess(lo) > 0:
        lo -= 6.0
        if lo < -200:
            return blahut_arimoto_rd(q, d, 0.0).R
    while excess(hi) < 0:
        hi += 3.0
        if hi > 200:
            return 0.0
    ls = brentq(excess, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    return blahut_arimoto_rd(q, d, math.exp(ls)).R


def distortion_rate(q, d_matrix, R: float, tol: float = 1e-12) -> float:
    """D_q(R), the inverse of :func:`rate_distortion`."""
    q = as_distribution(q).probs
    d = _check_distortion(d_matrix)
    if R < 0:
        raise ValueError("rate must be nonnegative")
    if R == 0:
        return _max_distortion(q, d)
    if R >= blahut_arimoto_rd(q, d, 0.0).R:
        return 0.0

    def shortfall(log_slope):
        return blahut_arimoto_rd(q, d, math.exp(log_slope), max_iter=_PROBE_ITER).R - R

    lo, hi = -6.0, 1.0
    while shortfall(lo) < 0:
        lo -= 6.0
        if lo < -200:
            return 0.0
    while shortfall(hi) > 0:
        hi += 3.0
        if hi > 200:
            return _max_distortion(q, d)
    ls = brentq(shortfall, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    return blahut_arimoto_rd(q, d, math.exp(ls)).D


def binary_rate_distortion(q: float, D: float) -> float:
    """Hamming rate-distortion function of a Bernoulli(q) source, in nats."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    q = min(q, 1.0 - q)
    if not 0.0 <= D <= q:
        raise ValueError(f"D must lie in [0, {q:g}]")
    return max(binary_entropy(q) - binary_entropy(D), 0.0)


def bss_distortion_rate(R: float) -> float:
    """Hamming distortion-rate function of the binary symmetric source."""
    if not 0.0 <= R <= LN2:
        raise ValueError("R must lie in [0, ln 2]")
    return binary_entropy_inverse(LN2 - R)


# ---------------------------------------------------------------------------
# lambda functionals
# ---------------------------------------------------------------------------


@dataclass
class LambdaFunctional:
    """Per-symbol cost of a universal strategy as a function of the type.

    ``kind`` selects one of ``shannon_entropy``, ``guessing_min`` (needs
    ``R``), ``rate_distortion`` (needs ``d_matrix`` and ``D``) or
    ``distortion_rate`` (needs ``d_matrix`` and ``R``).
    """

    kind: str
    R: Optional[float] = None
    D: Optional[float] = None
    d_matrix: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown lambda kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("guessing_min", "distortion_rate"):
            if self.R is None or self.R < 0:
                raise ValueError(f"{self.kind} needs a rate R >= 0")
        if self.kind == "rate_distortion" and (self.D is None or self.D < 0):
            raise ValueError("rate_distortion needs a distortion D >= 0")
        if self.kind in ("rate_distortion", "distortion_rate"):
            if self.d_matrix is None:
                raise ValueError(f"{self.kind} needs a distortion matrix")
            self.d_matrix = _check_distortion(self.d_matrix)

    @classmethod
    def shannon(cls) -> LambdaFunctional:
        return cls("shannon_entropy")

    @classmethod
    def guessing(cls, R: float) -> LambdaFunctional:
        return cls("guessing_min", R=R)

    @property
    def vectorized(self) -> bool:
        return self.kind in ("shannon_entropy", "guessing_min")

    def __call__(self, q) -> float:
        q = np.asarray(q, dtype=float)
        if self.kind == "shannon_entropy":
            return float(-xlogy(q, q).sum())
        if self.kind == "guessing_min":
            return min(float(-xlogy(q, q).sum()), self.R)
        # the cache key quantizes Q on a 1e-12 lattice
        key = tuple(np.round(q, 12))
        hit = self._cache.get(key)
        if hit is None:
            if self.kind == "rate_distortion":
                hit = rate_distortion(q, self.d_matrix, self.D)
            else:
                hit = distortion_rate(q, self.d_matrix, self.R)
            self._cache[key] = hit
        return hit

    def rows(self, grid: np.ndarray) -> np.ndarray:
        """Evaluate on every row of ``grid``."""
        if self.vectorized:
            h = -xlogy(grid, grid).sum(axis=1)
            return h if self.kind == "shannon_entropy" else np.minimum(h, self.R)
        return np.array([self(row) for row in grid])


# ---------------------------------------------------------------------------
# generic exponent
# ---------------------------------------------------------------------------


@dataclass
class ExponentResult:
    value: float
    argmax_q: FiniteDistribution
    solver_iterations: int
    oracle_gap: Optional[float] = None
    converged: bool = True


def _objective(lam, alpha, q, logp) -> float:
    mask = q > 0
    div = float(np.sum(q[mask] * (np.log(q[mask]) - logp[mask])))
    return alpha * lam(q) - div


def _lambda_gradient(lam, q: np.ndarray, h: float) -> np.ndarray:
    """Directional derivatives of ``lam`` along ``e_i - q`` (central where possible)."""
    grad = np.empty_like(q)
    for i in range(q.size):
        step = -q.copy()
        step[i] += 1.0
        if q[i] > 2.0 * h:
            grad[i] = (lam(q + h * step) - lam(q - h * step)) / (2.0 * h)
        else:
            grad[i] = (lam(q + h * step) - lam(q)) / h
    return grad


def _mirror_ascent(lam, alpha, q0, logp, tol, max_iter, h):
    q = q0.copy()
    fq = _objective(lam, alpha, q, logp)
    eta = 1.0
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        g = alpha * _lambda_gradient(lam, q, h) - (np.log(q) - logp)
        g -= q @ g
        improved = False
        while eta > 1e-14:
            log_c = np.log(q) + eta * g
            cand = np.exp(log_c - logsumexp(log_c))
            fc = _objective(lam, alpha, cand, logp)
            if fc > fq:
                improved = True
                break
            eta *= 0.5
        if not improved:
            converged = True
            break
        gain = fc - fq
        q, fq = cand, fc
        eta = min(2.0 * eta, 1e3)
        if gain < tol:
            converged = True
            break
    return q, fq, it, converged


def generic_exponent(
    p,
    lam: LambdaFunctional,
    alpha: float,
    tol: float = 1e-13,
    max_iter: int = 5000,
    oracle: Optional[bool] = None,
    oracle_resolution: int = 600,
    fd_step: float = 1e-6,
) -> ExponentResult:
    """Maximize ``alpha * lam(Q) - D(Q||P)`` over distributions Q.

    Uses multiplicative-weights (entropic mirror) ascent from Q = P with
    backtracking and finite-difference gradients of ``lam``.  For alphabets of
    size <= 3 a simplex-grid oracle runs as well (by default only for the
    cheap lambda kinds); when the grid beats the ascent, the ascent restarts
    from the grid point, and ``oracle_gap`` records value minus grid value.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    p = as_distribution(p)
    full = p.probs
    mask = p.support
    ps = full[mask]
    logp = np.log(ps)

    def lam_s(qs):
        q = np.zeros_like(full)
        q[mask] = qs
        return lam(q)

    def embed(qs):
        q = np.zeros_like(full)
        q[mask] = qs
        return FiniteDistribution(q, atol=1e-9)

    if alpha == 0:
        return ExponentResult(0.0, p, 0, 0.0 if oracle else None, True)

    q, val, iters, converged = _mirror_ascent(lam_s, alpha, ps, logp, tol, max_iter, fd_step)

    if oracle is None:
        oracle = lam.vectorized and p.alphabet_size <= 3
    gap = None
    if oracle:
        if p.alphabet_size > 3:
            raise ValueError("grid oracle limited to alphabets of size <= 3")
        grid = simplex_grid(p.alphabet_size, oracle_resolution)
        with np.errstate(invalid="ignore"):
            gvals = alpha * lam.rows(grid) - _kl_rows(grid, p)
        gi = int(np.argmax(gvals))
        gval = float(gvals[gi])
        if gval > val:
            start = 0.999 * grid[gi][mask] + 0.001 * ps
            start /= start.sum()
            q2, val2, it2, conv2 = _mirror_ascent(lam_s, alpha, start, logp, tol, max_iter, h=fd_step)
            iters += it2
            if val2 > val:
                q, val, converged = q2, val2, conv2
            if gval > val:
                q, val = grid[gi][mask], gval
        gap = val - gval
    return ExponentResult(float(val), embed(q), iters, gap, converged)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def lossless_exponent(p, alpha: float) -> float:
    """``alpha * H_{1/(1+alpha)}(P)``, the exponent of universal lossless coding."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return 0.0
    return alpha * renyi_entropy(p, 1.0 / (1.0 + alpha))


def escort(p, theta: float) -> FiniteDistribution:
    """The distribution proportional to ``P ** (1 / (1 + theta))``."""
    p = as_distribution(p)
    out = np.zeros_like(p.probs)
    mask = p.support
    log_w = np.log(p.probs[mask]) / (1.0 + theta)
    out[mask] = np.exp(log_w - logsumexp(log_w))
    return FiniteDistribution(out, atol=1e-9)


@dataclass
class GuessingExponentBreakdown:
    value: float
    phase: str
    theta_r: Optional[float]
    boundaries: tuple[float, float]


def guessing_exponent_closed(p, R: float, alpha: float) -> GuessingExponentBreakdown:
    """Three-phase exponent of the guessing moment against a rate-R key.

    ``phase`` is ``low_R`` (value ``alpha R``), ``middle`` (value
    ``(alpha - t) R + t H_{1/(1+t)}(P)`` with ``H(P_t) = R``) or ``high_R``
    (value ``alpha H_{1/(1+alpha)}(P)``).
    """
    p = as_distribution(p)
    if not np.all(p.support):
        raise ValueError("guessing exponent requires a fully supported P")
    if R < 0:
        raise ValueError("R must be nonnegative")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    h_lo = entropy(p)
    h_hi = entropy(escort(p, alpha))
    bounds = (h_lo, h_hi)
    if R >= h_hi:
        return GuessingExponentBreakdown(lossless_exponent(p, alpha), "high_R", None, bounds)
    if R < h_lo:
        return GuessingExponentBreakdown(alpha * R, "low_R", None, bounds)
    theta = _solve_theta(p, R, alpha)
    value = (alpha - theta) * R + lossless_exponent(p, theta)
    return GuessingExponentBreakdown(value, "middle", theta, bounds)


def _solve_theta(p: FiniteDistribution, R: float, alpha: float) -> float:
    hi = max(alpha, 50.0)

    def f(t):
        return entropy(escort(p, t)) - R

    if f(0.0) >= 0:
        return 0.0
    if f(hi) <= 0:
        return hi
    lo = 0.0
    # plain bisection; H(P_t) is increasing in t
    while hi - lo > 1e-13 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def two_part_code_exact_moment(p, alpha: float, n: int) -> float:
    """``(1/n) ln E exp(alpha * n * empirical_entropy(X^n))`` by type enumeration."""
    p = as_distribution(p)
    if p.alphabet_size > 4 or n > 60:
        raise ValueError("type enumeration limited to alphabet <= 4 and n <= 60")
    if n < 1:
        raise ValueError("n must be positive")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    counts = compositions(p.alphabet_size, n)
    with np.errstate(divide="ignore"):
        logp = np.log(p.probs)
    log_mult = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)
    safe_logp = np.where(np.isfinite(logp), logp, 0.0)
    log_prob = np.where(counts > 0, counts * safe_logp, 0.0).sum(axis=1)
    # a count on a zero-mass symbol makes the type impossible
    log_prob[(counts > 0)[:, ~np.isfinite(logp)].any(axis=1)] = -np.inf
    freqs = counts / n
    emp_h = -xlogy(freqs, freqs).sum(axis=1)
    return float(logsumexp(log_mult + log_prob + alpha * n * emp_h) / n)


def rem_lossy_exponent(R: float, alpha: float) -> tuple[float, float]:
    """Negative-moment distortion exponent of a random rate-R code on the BSS.

    Returns ``(value, critical_alpha)``; the curve is linear in alpha below
    the critical point and follows the free-energy branch above it.
    """
    if not 0.0 < R < LN2:
        raise ValueError("R must lie strictly between 0 and ln 2")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    delta = bss_distortion_rate(R)
    critical = math.log((1.0 - delta) / delta)
    if alpha <= critical:
        return -alpha * delta, critical
    return -alpha + math.log1p(math.exp(alpha)) + R - LN2, critical


def guessing_variational(p, R: float, alpha: float, **kwargs) -> ExponentResult:
    return generic_exponent(p, LambdaFunctional.guessing(R), alpha, **kwargs)


__all__ = [
    "LambdaFunctional",
    "ExponentResult",
    "GuessingExponentBreakdown",
    "RDPoint",
    "blahut_arimoto_rd",
    "rate_distortion",
    "distortion_rate",
    "binary_rate_distortion",
    "bss_distortion_rate",
    "generic_exponent",
    "lossless_exponent",
    "guessing_exponent_closed",
    "guessing_variational",
    "two_part_code_exact_moment",
    "rem_lossy_exponent",
    "escort",
    "hamming",
    "kl_divergence",
]
