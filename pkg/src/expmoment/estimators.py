"""Closed-form and fixed-point solvers for exponential-moment estimation problems.

Covers the optimal code distribution, the linear estimator under a
finite-support prior with unit-variance Gaussian observation noise, the
Gaussian sample mean, and the CRB-based lower bound for unbiased estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .probability import FiniteDistribution, as_distribution

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# damped steps tried before switching to a bracketing root search
_DAMPED_STEPS = 500


# ---------------------------------------------------------------------------
# optimal code distribution
# ---------------------------------------------------------------------------


def optimal_code_distribution(p, alpha: float) -> tuple[FiniteDistribution, float]:
    """Code distribution minimizing ``E_P exp(-alpha * ln s(X))``.

    The minimizer is proportional to ``p ** (1 / (1 + alpha))``.  The second
    return value is the log-moment at the minimizer, evaluated directly from
    the code lengths.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    p = as_distribution(p)
    mask = p.support
    logp = np.log(p.probs[mask])
    log_s = logp / (1.0 + alpha)
    log_s = log_s - logsumexp(log_s)
    s = np.zeros_like(p.probs)
    s[mask] = np.exp(log_s)
    log_moment = float(logsumexp(logp - alpha * log_s))
    return FiniteDistribution(s, atol=1e-9), log_moment


# ---------------------------------------------------------------------------
# linear estimator, finite-support prior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoPointPrior:
    phi_plus: float
    phi_minus: float

    def __post_init__(self):
        if not (math.isfinite(self.phi_plus) and math.isfinite(self.phi_minus)):
            raise ValueError("phi values must be finite")

    def as_finite(self) -> FiniteSupportPrior:
        return FiniteSupportPrior([1.0, -1.0], [0.5, 0.5], [self.phi_plus, self.phi_minus])


@dataclass(frozen=True, eq=False)
class FiniteSupportPrior:
    """Prior on Y with finite support plus the conditional mean phi(y) of X."""

    support: np.ndarray
    weights: FiniteDistribution
    phi: np.ndarray

    def __init__(self, support, weights, phi):
        support = np.asarray(support, dtype=float).ravel()
        phi = np.asarray(phi, dtype=float).ravel()
        weights = as_distribution(weights)
        if not support.size == phi.size == weights.alphabet_size:
            raise ValueError("prior arrays must have equal length")
        if np.unique(support).size != support.size:
            raise ValueError("support points must be distinct")
        if not (np.all(np.isfinite(support)) and np.all(np.isfinite(phi))):
            raise ValueError("support and phi must be finite")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "phi", phi)


class FixpointResult(NamedTuple):
    s: float
    iterations: int
    residual: float
    converged: bool


def _check_alpha_half(alpha: float):
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2) for unit conditional variance")


def bayes_linear_map(prior: FiniteSupportPrior, alpha: float, s: float) -> float:
    """One application of ``s -> E~[Y phi(Y)] / E~[Y^2]`` under the reweighted prior."""
    y, phi = prior.support, prior.phi
    with np.errstate(divide="ignore"):
        log_w = np.log(prior.weights.probs)
    log_w = log_w + alpha / (1.0 - 2.0 * alpha) * (phi - s * y) ** 2
    w = np.exp(log_w - logsumexp(log_w))
    denom = float(np.sum(w * y * y))
    if denom <= 0.0:
        raise ValueError("reweighted E[Y^2] vanishes; the fixed point is undefined")
    return float(np.sum(w * y * phi)) / denom


def _bracket_root(g, s: float, limit: float = 1e8):
    """Expand outward from ``s`` until ``g`` changes sign; None if it never does."""
    g0 = g(s)
    if g0 == 0.0:
        return s, s
    step = 1e-3 * max(1.0, abs(s))
    while step < limit:
        for t in (s - step, s + step):
            if g(t) * g0 <= 0.0:
                return (min(s, t), max(s, t))
        step *= 2.0
    return None


def bayes_linear_fixpoint(
    prior: FiniteSupportPrior,
    alpha: float,
    s0: float = 0.0,
    max_iter: int = 10_000,
    tol: float = 1e-12,
    damping: float = 0.5,
) -> FixpointResult:
    """Damped fixed-point iteration for the exponential-moment linear coefficient.

    Solves ``s = E~[Y phi(Y)] / E~[Y^2]`` where the tilde expectation uses
    ``P(y) exp(alpha / (1 - 2 alpha) * (phi(y) - s y)^2)``.  When the map is
    steep enough that damping cannot stop oscillation, the remaining budget
    goes to a bracketing root search on ``map(s) - s`` started at the stalled
    iterate.  The fixed point reached depends on ``s0`` when several exist;
    see :func:`bayes_linear_multistart`.
    """
    _check_alpha_half(alpha)
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")

    def g(t):
        return bayes_linear_map(prior, alpha, t) - t

    s = float(s0)
    residual = abs(g(s))
    it = 0
    damped_budget = min(max_iter, _DAMPED_STEPS)
    while residual > tol and it < damped_budget:
        s = (1.0 - damping) * s + damping * bayes_linear_map(prior, alpha, s)
        residual = abs(g(s))
        it += 1
    if residual > tol and it < max_iter:
        # oscillation: g is continuous, so bracket a sign change and bisect
        bracket = _bracket_root(g, s)
        if bracket is not None and bracket[0] < bracket[1]:
            root, info = brentq(
                g, *bracket, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                maxiter=max(max_iter - it, 1), full_output=True, disp=False,
            )
            it += info.function_calls
            if abs(g(root)) < residual:
                s, residual = float(root), abs(g(root))
    # one undamped step lands exactly on a locally constant map
    polished = bayes_linear_map(prior, alpha, s)
    polished_res = abs(g(polished))
    if polished_res <= residual:
        s, residual = polished, polished_res
    return FixpointResult(s, it, residual, residual <= tol)


def two_point_fixpoint(
    prior: TwoPointPrior,
    alpha: float,
    s0: float = 0.0,
    max_iter: int = 10_000,
    tol: float = 1e-12,
    damping: float = 0.5,
) -> float:
    """Fixed point for the equiprobable prior on {+1, -1}."""
    res = bayes_linear_fixpoint(prior.as_finite(), alpha, s0, max_iter, tol, damping)
    if not res.converged:
        raise RuntimeError(f"fixed point did not converge (residual {res.residual:.3g})")
    return res.s


def linear_estimator_log_moment(
    prior: FiniteSupportPrior, alpha: float, s: float, nodes: int = 64
) -> float:
    """``ln E exp(alpha (X - s Y)^2)`` by Gauss-Hermite quadrature over X | Y."""
    _check_alpha_half(alpha)
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    # X | Y=y is N(phi(y), 1)
    err = prior.phi[:, None] + x[None, :] - s * prior.support[:, None]
    with np.errstate(divide="ignore"):
        log_py = np.log(prior.weights.probs)
    terms = log_py[:, None] + np.log(w)[None, :] + alpha * err**2
    return float(logsumexp(terms))


def bayes_linear_multistart(
    prior: FiniteSupportPrior, alpha: float, starts=None, **kwargs
) -> tuple[float, list[FixpointResult]]:
    """Collect fixed points from several starts and keep the best by direct evaluation."""
    if starts is None:
        scale = float(np.max(np.abs(prior.phi)) + 1.0)
        starts = np.linspace(-2.0 * scale, 2.0 * scale, 9)
    found = [bayes_linear_fixpoint(prior, alpha, s0, **kwargs) for s0 in starts]
    good = [r for r in found if r.converged]
    if not good:
        raise RuntimeError("no start converged")
    best = min(good, key=lambda r: linear_estimator_log_moment(prior, alpha, r.s))
    return best.s, found


# ---------------------------------------------------------------------------
# Gaussian sample mean
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianLocationFamily:
    n: int
    sigma2: float
    theta: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def alpha_limit(self) -> float:
        return self.n / (2.0 * self.sigma2)


def gaussian_sample_mean_moment(fam: GaussianLocationFamily, alpha: float) -> float:
    """``E exp(alpha (mean - theta)^2)`` for the sample mean, in the linear domain."""
    if alpha >= fam.alpha_limit:
        raise ValueError(
            f"moment diverges for alpha >= n / (2 sigma2) = {fam.alpha_limit:g}"
        )
    return (1.0 - 2.0 * alpha * fam.sigma2 / fam.n) ** -0.5


# ---------------------------------------------------------------------------
# CRB-based lower bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CRBSpec:
    """Per-family ingredients of the bound.

    ``crb_at(t)`` is the Cramer-Rao bound at parameter ``t`` and
    ``kl_at(t, theta)`` the divergence D(P_t || P_theta).
    """

    crb_at: Callable[[float], float]
    kl_at: Callable[[float, float], float]
    search_interval: tuple[float, float]


class CRBBound(NamedTuple):
    bound_log: float
    argmax_theta_prime: float
    unbounded: bool


def gaussian_location_crb(fam: GaussianLocationFamily, half_width: float = 10.0) -> CRBSpec:
    n, s2 = fam.n, fam.sigma2
    return CRBSpec(
        crb_at=lambda t: s2 / n,
        kl_at=lambda t, theta: n * (t - theta) ** 2 / (2.0 * s2),
        search_interval=(fam.theta - half_width, fam.theta + half_width),
    )


def _golden_max(f, a: float, b: float, width: float) -> float:
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def crb_lower_bound(
    spec: CRBSpec, theta: float, alpha: float, grid: int = 1001, width: float = 1e-10
) -> CRBBound:
    """Lower bound on ``ln E_theta exp(alpha (est - theta)^2)`` for unbiased estimators.

    Maximizes ``alpha CRB(t) + alpha (t - theta)^2 - D(P_t || P_theta)`` over
    a grid of ``t`` in the search interval, refined by golden section.  The
    ``unbounded`` flag is raised when the maximum sits on the interval edge
    and is still increasing there.
    """
    lo, hi = spec.search_interval
    if grid < 3:
        raise ValueError("grid must have at least 3 points")
    if not lo <= theta <= hi:
        raise ValueError("search interval must contain theta")

    def objective(t):
        return alpha * spec.crb_at(t) + alpha * (t - theta) ** 2 - spec.kl_at(t, theta)

    ts = np.linspace(lo, hi, grid)
    # theta itself is always a candidate
    ts = np.union1d(ts, [theta])
    vals = np.array([objective(t) for t in ts])
    i = int(np.argmax(vals))
    at_edge = i in (0, ts.size - 1)
    unbounded = at_edge and (
        (i == 0 and vals[0] > vals[1]) or (i == ts.size - 1 and vals[-1] > vals[-2])
    )
    if at_edge:
        return CRBBound(float(vals[i]), float(ts[i]), bool(unbounded))
    t_star = _golden_max(objective, ts[i - 1], ts[i + 1], width)
    best_t, best_v = float(ts[i]), float(vals[i])
    v_star = objective(t_star)
    if v_star > best_v:
        best_t, best_v = float(t_star), float(v_star)
    return CRBBound(best_v, best_t, False)
