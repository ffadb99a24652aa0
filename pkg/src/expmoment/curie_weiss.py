"""Exponential moment of the squared error of the sample magnetization.

For n i.i.d. +-1 spins with mean ``mu``, ``E exp(alpha n (mu_hat - mu)^2)``
is a Curie-Weiss partition function with field
``B = artanh(mu) - 2 alpha mu`` and coupling ``J = 2 alpha``.  Its
exponential rate is a maximum over the magnetization ``m``; the maximizers
solve ``m = tanh(J m + B)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .probability import binary_entropy, binary_kl

SCAN_POINTS = 10_000
ROOT_TOL = 1e-12
BOUNDARY_TOL = 1e-9
TIE_TOL = 1e-12

PHASES = (
    "paramagnetic",
    "pos_mu_pos_m",
    "neg_mu_pos_m",
    "neg_mu_neg_m",
    "pos_mu_neg_m",
    "boundary",
)


@dataclass(frozen=True)
class CWParams:
    mu: float
    alpha: float

    def __post_init__(self):
        if not -1.0 < self.mu < 1.0:
            raise ValueError("mu must lie in (-1, 1)")
        if not self.alpha >= 0:
            raise ValueError("alpha must be nonnegative")

    @property
    def field(self) -> float:
        return math.atanh(self.mu) - 2.0 * self.alpha * self.mu

    @property
    def coupling(self) -> float:
        return 2.0 * self.alpha


def alpha0(mu: float) -> float:
    """Critical tilt where the effective field changes sign; 1/2 at mu = 0."""
    if mu == 0:
        return 0.5
    return math.atanh(mu) / (2.0 * mu)


def _residual(m, J, B):
    return m - np.tanh(J * m + B)


def _bisect(f, a, b, tol):
    fa = f(a)
    while b - a > tol:
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def magnetization_fixed_points(params: CWParams) -> list[float]:
    """All solutions of ``m = tanh(J m + B)`` in [-1, 1], ascending.

    Sign changes on a uniform scan are refined by bisection; touching roots
    (tangency) are picked up from local extrema of the residual.
    """
    J, B = params.coupling, params.field

    def f(m):
        return float(_residual(m, J, B))

    grid = np.linspace(-1.0, 1.0, SCAN_POINTS + 1)
    vals = _residual(grid, J, B)
    roots = [float(m) for m in grid[vals == 0]]
    # compare signs, not products: products of tiny residuals underflow
    signs = np.sign(vals)
    for i in np.flatnonzero(signs[:-1] * signs[1:] < 0):
        roots.append(_bisect(f, float(grid[i]), float(grid[i + 1]), ROOT_TOL))
    # local extrema of the residual that touch zero without crossing
    if J > 1:
        # stationary points of the residual satisfy J sech^2(J m + B) = 1
        for sign in (1.0, -1.0):
            m = (sign * math.acosh(math.sqrt(J)) - B) / J
            if -1.0 <= m <= 1.0 and abs(f(m)) <= ROOT_TOL:
                roots.append(m)
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if merged and abs(r - merged[-1]) < 1e-7:
            continue
        merged.append(r)
    return merged


def _objective(m, params: CWParams) -> float:
    """``alpha (m - mu)^2 - d((1+m)/2 || (1+mu)/2)``."""
    return params.alpha * (m - params.mu) ** 2 - binary_kl(
        (1.0 + m) / 2.0, (1.0 + params.mu) / 2.0
    )


@dataclass(frozen=True)
class CWExponent:
    exponent: float
    dominant_m: float
    tie: bool = False


def cw_exponent(params: CWParams) -> CWExponent:
    """Exponential rate of ``E exp(alpha n (mu_hat - mu)^2)`` and its dominant m.

    Candidates are the fixed points plus the endpoints; on a tie between two
    maximizers the nonnegative one is reported and ``tie`` is set.
    """
    cands = magnetization_fixed_points(params) + [-1.0, 1.0]
    vals = [_objective(m, params) for m in cands]
    best = max(vals)
    winners = sorted({m for m, v in zip(cands, vals) if v >= best - TIE_TOL})
    tie = len(winners) > 1
    if tie:
        nonneg = [m for m in winners if m >= 0]
        dominant = nonneg[0] if nonneg else winners[-1]
    else:
        dominant = winners[0]
    return CWExponent(float(best), float(dominant), tie)


def cw_exponent_partition_form(params: CWParams, m: float) -> float:
    """The same objective written through the Curie-Weiss free energy.

    ``1/2 ln((1 - mu^2)/4) + alpha mu^2 + h2((1+m)/2) + B m + J m^2 / 2``.
    """
    mu, a = params.mu, params.alpha
    return (
        0.5 * math.log((1.0 - mu * mu) / 4.0)
        + a * mu * mu
        + binary_entropy((1.0 + m) / 2.0)
        + params.field * m
        + 0.5 * params.coupling * m * m
    )


def cw_exact_finite_n(params: CWParams, n: int) -> float:
    """Exact ``(1/n) ln E exp(alpha n (mu_hat - mu)^2)`` by summing the binomial."""
    if n < 1:
        raise ValueError("n must be positive")
    k = np.arange(n + 1)
    m_k = (2.0 * k - n) / n
    log_terms = (
        gammaln(n + 1)
        - gammaln(k + 1)
        - gammaln(n - k + 1)
        + k * math.log((1.0 + params.mu) / 2.0)
        + (n - k) * math.log((1.0 - params.mu) / 2.0)
        + params.alpha * n * (m_k - params.mu) ** 2
    )
    return float(logsumexp(log_terms) / n)


@dataclass
class PhasePoint:
    params: CWParams
    fixed_points: list[float]
    dominant_m: float
    exponent: float
    phase: str
    tie: bool = False

    @property
    def n_fixed_points(self) -> int:
        return len(self.fixed_points)


def phase_label(mu: float, alpha: float) -> str:
    """Region of the (mu, alpha) plane, without solving anything."""
    if abs(alpha - 0.5) <= BOUNDARY_TOL:
        return "boundary"
    if alpha < 0.5:
        return "paramagnetic"
    if abs(mu) <= BOUNDARY_TOL or abs(alpha - alpha0(mu)) <= BOUNDARY_TOL:
        return "boundary"
    below = alpha < alpha0(mu)
    if mu > 0:
        return "pos_mu_pos_m" if below else "pos_mu_neg_m"
    return "neg_mu_neg_m" if below else "neg_mu_pos_m"


def classify_phase(params: CWParams) -> PhasePoint:
    roots = magnetization_fixed_points(params)
    exp_ = cw_exponent(params)
    phase = phase_label(params.mu, params.alpha)
    # tangency (double root) is a measure-zero boundary
    if len(roots) == 2:
        phase = "boundary"
    return PhasePoint(params, roots, exp_.dominant_m, exp_.exponent, phase, exp_.tie)


def _axis(spec) -> np.ndarray:
    lo, hi, steps = spec
    steps = int(steps)
    if steps < 2:
        raise ValueError("each axis needs at least 2 points")
    return np.linspace(float(lo), float(hi), steps)


def _classify_pair(pair):
    mu, alpha = pair
    return classify_phase(CWParams(mu, alpha))


def phase_diagram_grid(mu_range, alpha_range, workers: Optional[int] = None) -> list[PhasePoint]:
    """Classify every point of a ``(mu, alpha)`` grid, mu-major order.

    Ranges are ``(lo, hi, steps)`` triples.  With ``workers > 1`` points are
    evaluated in a process pool; row order is unaffected.
    """
    mus, alphas = _axis(mu_range), _axis(alpha_range)
    pairs = [(float(mu), float(a)) for mu in mus for a in alphas]
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_classify_pair, pairs, chunksize=64))
    return [_classify_pair(pair) for pair in pairs]


PHASE_COLUMNS = ("mu", "alpha", "n_fixed_points", "dominant_m", "exponent", "phase")


def phase_rows(points: list[PhasePoint]) -> list[tuple]:
    return [
        (pt.params.mu, pt.params.alpha, pt.n_fixed_points, pt.dominant_m, pt.exponent, pt.phase)
        for pt in points
    ]
