"""Exponential moments over finite strategy sets.

Costs live in a :class:`FiniteCostTable` indexed ``[symbol, strategy]``.
Moments are always returned in the log domain, ``ln E_P exp(alpha * cost)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.special import logsumexp, xlogy

from .probability import FiniteDistribution, as_distribution, tilted_measure

CERTIFY_TOL = 1e-9
MAX_GRID_ALPHABET = 4
# strategies per block when scanning strategy x grid products
_BLOCK = 64


@dataclass(frozen=True, eq=False)
class FiniteCostTable:
    costs: np.ndarray

    def __init__(self, costs):
        arr = np.array(costs, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"cost table must be a nonempty matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cost table entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "costs", arr)

    @property
    def n_symbols(self) -> int:
        return self.costs.shape[0]

    @property
    def n_strategies(self) -> int:
        return self.costs.shape[1]

    def column(self, s: int) -> np.ndarray:
        if not 0 <= s < self.n_strategies:
            raise IndexError(f"strategy index {s} out of range [0, {self.n_strategies})")
        return self.costs[:, s]


@dataclass(frozen=True)
class CertificateReport:
    certified: bool
    tilted_q: FiniteDistribution
    strategy_index: int
    q_objective_gap: float
    log_z: float


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int


def _check(p, table: FiniteCostTable) -> FiniteDistribution:
    p = as_distribution(p)
    if p.alphabet_size != table.n_symbols:
        raise ValueError(
            f"distribution has {p.alphabet_size} symbols, table has {table.n_symbols}"
        )
    return p


def _log_moments(p: FiniteDistribution, costs: np.ndarray, alpha: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logp = np.log(p.probs)
    return logsumexp(logp[:, None] + alpha * costs, axis=0)


def exp_moment(p, table: FiniteCostTable, s: int, alpha: float) -> float:
    """``ln E_P exp(alpha * cost(X, s))`` via log-sum-exp."""
    p = _check(p, table)
    return float(_log_moments(p, table.column(s)[:, None], alpha)[0])


def brute_force_optimum(p, table: FiniteCostTable, alpha: float) -> tuple[int, float]:
    """Exhaustive minimizer of the exponential moment; ties go to the lowest index."""
    p = _check(p, table)
    logm = _log_moments(p, table.costs, alpha)
    best = int(np.argmin(logm))
    return best, float(logm[best])


def compositions(m: int, n: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``m`` summing to ``n``.

    Rows are ordered lexicographically.
    """
    if m < 1 or n < 0:
        raise ValueError("need m >= 1 and n >= 0")
    # stars and bars: choose m-1 bar positions among n+m-1 slots
    bars = np.array(list(combinations(range(n + m - 1), m - 1)), dtype=np.int64)
    bars = bars.reshape(-1, m - 1)
    edges = np.hstack(
        [np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), n + m - 1)]
    )
    return np.diff(edges, axis=1) - 1


def simplex_grid(m: int, resolution: int, interior: bool = False) -> np.ndarray:
    """All points ``k / resolution`` of the probability simplex in ``m`` dims.

    ``interior`` keeps only points with every coordinate positive.
    """
    if resolution < 1:
        raise ValueError("resolution must be positive")
    lo = 1 if interior else 0
    n = resolution - lo * m
    if n < 0:
        return np.empty((0, m))
    return (compositions(m, n) + lo) / resolution


def _kl_rows(grid: np.ndarray, p: FiniteDistribution) -> np.ndarray:
    """D(Q||P) for every row Q of ``grid`` (inf where Q escapes supp P)."""
    with np.errstate(divide="ignore"):
        logp = np.log(p.probs)
    inside = xlogy(grid, grid).sum(axis=1)
    cross = np.where(grid > 0, grid * np.where(np.isfinite(logp), logp, 0.0), 0.0).sum(axis=1)
    escape = ((grid > 0) & (p.probs == 0)).any(axis=1)
    return np.where(escape, np.inf, inside - cross)


def _require_small(p: FiniteDistribution):
    if p.alphabet_size > MAX_GRID_ALPHABET:
        raise ValueError(
            f"grid enumeration limited to alphabets of size <= {MAX_GRID_ALPHABET}"
        )


def gibbs_variational(
    p, table: FiniteCostTable, s: int, alpha: float, grid_resolution: int
) -> tuple[float, FiniteDistribution]:
    """Grid maximum of ``alpha * E_Q cost(X, s) - D(Q||P)`` over the simplex.

    The true maximum equals :func:`exp_moment` and is attained by the tilted
    measure; this routine is the brute-force side of that identity.
    """
    p = _check(p, table)
    _require_small(p)
    grid = simplex_grid(p.alphabet_size, grid_resolution)
    vals = alpha * (grid @ table.column(s)) - _kl_rows(grid, p)
    i = int(np.argmax(vals))
    return float(vals[i]), FiniteDistribution(grid[i], atol=1e-9)


def theorem1_certify(
    p, table: FiniteCostTable, s: int, alpha: float, tol: float = CERTIFY_TOL
) -> CertificateReport:
    """Check the tilted-measure sufficient condition for optimality of ``s``.

    Tilts P by ``alpha * cost(., s)`` and asks whether ``s`` also minimizes
    the ordinary expected cost under the tilted measure.  A positive answer
    proves ``s`` is within ``alpha * tol`` of the best exponential moment; a
    negative answer proves nothing.
    """
    if alpha < 0:
        raise ValueError("certificate requires alpha >= 0")
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = _check(p, table)
    tilt = tilted_measure(p, table.column(s), alpha)
    q_costs = tilt.q.probs @ table.costs
    gap = max(float(q_costs[s] - q_costs.min()), 0.0)
    return CertificateReport(
        certified=gap <= tol,
        tilted_q=tilt.q,
        strategy_index=s,
        q_objective_gap=gap,
        log_z=tilt.log_z,
    )


def saddle_gap(
    p, table: FiniteCostTable, alpha: float, grid_resolution: int
) -> tuple[float, float]:
    """Min-max and max-min of ``alpha * E_Q cost - D(Q||P)`` on a Q-grid."""
    p = _check(p, table)
    _require_small(p)
    grid = simplex_grid(p.alphabet_size, grid_resolution)
    kl = _kl_rows(grid, p)
    inner_max = np.empty(table.n_strategies)
    inner_min = np.full(grid.shape[0], np.inf)
    for start in range(0, table.n_strategies, _BLOCK):
        block = table.costs[:, start : start + _BLOCK]
        vals = alpha * (grid @ block) - kl[:, None]
        inner_max[start : start + block.shape[1]] = vals.max(axis=0)
        np.minimum(inner_min, vals.min(axis=1), out=inner_min)
    return float(inner_max.min()), float(inner_min.max())


def mc_estimate_exp_moment(
    p,
    table: FiniteCostTable,
    s: int,
    alpha: float,
    n_samples: int = 100_000,
    seed: int = 0,
) -> MCEstimate:
    """Monte Carlo estimate of ``E_P exp(alpha * cost(X, s))`` (linear domain)."""
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    p = _check(p, table)
    rng = np.random.default_rng(seed)
    xs = rng.choice(p.alphabet_size, size=n_samples, p=p.probs)
    vals = np.exp(alpha * table.column(s)[xs])
    # shift by the first draw so a constant sample averages exactly
    shift = float(vals[0])
    centered = vals - shift
    mean = shift + float(np.mean(centered))
    std_error = float(np.std(centered, ddof=1) / math.sqrt(n_samples))
    return MCEstimate(mean=mean, std_error=std_error, n_samples=n_samples, seed=seed)


def code_length_table(m: int, resolution: int) -> tuple[FiniteCostTable, np.ndarray]:
    """Code-length losses ``-ln s(x)`` with strategies on the interior simplex grid.

    Returns the table and the strategy distributions (one per row).
    """
    strategies = simplex_grid(m, resolution, interior=True)
    return FiniteCostTable(-np.log(strategies.T)), strategies
