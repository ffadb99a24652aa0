"""Finite-alphabet distributions and information measures.

All quantities are in nats, with the convention 0 ln 0 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

NORMALIZATION_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Probability vector over a finite alphabet.

    The vector is validated against ``atol`` and then renormalized so the
    stored masses sum to one up to rounding.
    """

    probs: np.ndarray

    def __init__(self, probs, atol: float = NORMALIZATION_ATOL):
        arr = np.array(probs, dtype=float).ravel()
        if arr.size < 1:
            raise ValueError("distribution needs at least one symbol")
        if not np.all(np.isfinite(arr)):
            raise ValueError("distribution entries must be finite")
        if np.any(arr < 0):
            raise ValueError(f"negative probability mass: {arr.min()!r}")
        total = math.fsum(arr)
        if abs(total - 1.0) > atol:
            raise ValueError(f"probabilities sum to {total!r}, not 1 (atol={atol})")
        arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    @property
    def support(self) -> np.ndarray:
        return self.probs > 0

    def __len__(self):
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __repr__(self):
        body = ", ".join(f"{v:.6g}" for v in self.probs)
        return f"FiniteDistribution([{body}])"

    @classmethod
    def uniform(cls, m: int) -> FiniteDistribution:
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def from_weights(cls, weights) -> FiniteDistribution:
        """Normalize nonnegative weights into a distribution."""
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise ValueError("weights must be finite, nonnegative, not all zero")
        return cls(w / w.sum(), atol=1e-9)

    @classmethod
    def from_log_weights(cls, log_w) -> FiniteDistribution:
        log_w = np.asarray(log_w, dtype=float)
        return cls(np.exp(log_w - logsumexp(log_w)), atol=1e-9)


@dataclass(frozen=True)
class TiltResult:
    """Tilted measure together with the log of its normalizer."""

    q: FiniteDistribution
    log_z: float


def as_distribution(p) -> FiniteDistribution:
    if isinstance(p, FiniteDistribution):
        return p
    return FiniteDistribution(p)


def entropy(p) -> float:
    """Shannon entropy ``-sum p ln p``."""
    probs = as_distribution(p).probs
    return float(-xlogy(probs, probs).sum())


def kl_divergence(q, p) -> float:
    """Relative entropy D(q||p); ``math.inf`` when q is not dominated by p."""
    q = as_distribution(q).probs
    p = as_distribution(p).probs
    if q.size != p.size:
        raise ValueError("alphabet sizes differ")
    if np.any((p == 0) & (q > 0)):
        return math.inf
    mask = q > 0
    val = float(np.sum(q[mask] * (np.log(q[mask]) - np.log(p[mask]))))
    return max(val, 0.0)


def renyi_entropy(p, u: float) -> float:
    """Renyi entropy of order ``u`` (u > 0, u != 1).

    The order-one case is deliberately rejected; call :func:`entropy`.
    """
    if u <= 0:
        raise ValueError("Renyi order must be positive")
    if u == 1:
        raise ValueError("Renyi order 1 is Shannon entropy; use entropy()")
    probs = as_distribution(p).probs
    probs = probs[probs > 0]
    return float(logsumexp(u * np.log(probs)) / (1.0 - u))


def binary_entropy(d: float) -> float:
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"binary entropy argument {d!r} outside [0, 1]")
    return float(-xlogy(d, d) - xlogy(1.0 - d, 1.0 - d))


def _entropy_deficit(d: float) -> float:
    """``ln 2 - binary_entropy(d)`` without cancellation near d = 1/2."""
    if d < 0.25:
        # far from 1/2 the direct form is accurate and resolves tiny d
        return math.log(2.0) - binary_entropy(d)
    x = 1.0 - 2.0 * d
    return 0.5 * ((1.0 + x) * math.log1p(x) + (1.0 - x) * math.log1p(-x))


def binary_entropy_inverse(h: float) -> float:
    """Root in [0, 1/2] of ``binary_entropy(d) = h``.

    Bisects on the deficit ``ln 2 - h`` down to adjacent doubles, which keeps
    the answer exact at ``h = ln 2`` and relatively accurate for tiny ``d``.
    Near d = 1/2 the map is flat, so a rounded h fixes d only to about
    ``sqrt(eps)``.
    """
    ln2 = math.log(2.0)
    if not -1e-15 <= h <= ln2 + 1e-15:
        raise ValueError(f"binary entropy value {h!r} outside [0, ln 2]")
    if h <= 0.0:
        return 0.0
    g = max(ln2 - h, 0.0)
    if g == 0.0:
        return 0.5
    lo, hi = 0.0, 0.5
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        # deficit decreases in d
        if _entropy_deficit(mid) > g:
            lo = mid
        else:
            hi = mid
    return lo if abs(_entropy_deficit(lo) - g) < abs(_entropy_deficit(hi) - g) else hi


def binary_kl(a: float, b: float) -> float:
    """Divergence between Bernoulli(a) and Bernoulli(b)."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"a={a!r} outside [0, 1]")
    if not 0.0 < b < 1.0:
        raise ValueError(f"b={b!r} outside (0, 1)")
    val = xlogy(a, a) - xlogy(a, b) + xlogy(1 - a, 1 - a) - xlogy(1 - a, 1 - b)
    return max(float(val), 0.0)


def tilted_measure(p, cost_column, alpha: float) -> TiltResult:
    """Exponentially tilt ``p`` by ``exp(alpha * cost)``.

    Negative ``alpha`` is allowed.
    """
    p = as_distribution(p)
    cost = np.asarray(cost_column, dtype=float).ravel()
    if cost.shape != p.probs.shape:
        raise ValueError("cost column length does not match alphabet")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite")
    with np.errstate(divide="ignore"):
        log_w = np.log(p.probs) + alpha * cost
    log_z = float(logsumexp(log_w))
    return TiltResult(FiniteDistribution(np.exp(log_w - log_z), atol=1e-9), log_z)
