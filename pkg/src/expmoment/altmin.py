"""Alternating minimization for the negative exponential moment.

Maximizes ``E_P exp(-alpha * cost(X, s))`` over a finite strategy set by
alternating the tilt ``Q ~ P exp(-alpha * cost(., s))`` with the ordinary
expected-cost minimizer under ``Q``.  Each sweep cannot decrease the
objective, but the limit is only an equilibrium, not necessarily the global
maximizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .probability import tilted_measure
from .strategy_core import FiniteCostTable, _check, _log_moments


@dataclass
class AltMinTrajectory:
    strategy_sequence: list[int] = field(default_factory=list)
    objective_sequence: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def final_strategy(self) -> int:
        return self.strategy_sequence[-1]

    @property
    def final_objective(self) -> float:
        return self.objective_sequence[-1]


def alt_minimize_neg_moment(
    p,
    table: FiniteCostTable,
    alpha: float,
    s0: int = 0,
    max_iter: int = 1000,
    tol: float = 1e-10,
) -> AltMinTrajectory:
    """Run the tilt / re-optimize alternation from strategy ``s0``.

    The objective recorded per iterate is ``ln E_P exp(-alpha * cost(X, s_k))``.
    Stops when the best response reproduces the current strategy (or any
    earlier one), when the objective gain drops below ``tol``, or after
    ``max_iter`` updates.  Ties in the best response go to the lowest index.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    p = _check(p, table)
    table.column(s0)
    objectives = _log_moments(p, table.costs, -alpha)

    traj = AltMinTrajectory([s0], [float(objectives[s0])])
    visited = {s0}
    s = s0
    while traj.iterations < max_iter:
        q = tilted_measure(p, table.column(s), -alpha).q
        s_next = int(np.argmin(q.probs @ table.costs))
        if s_next == s or s_next in visited:
            traj.converged = True
            break
        gain = float(objectives[s_next] - objectives[s])
        traj.strategy_sequence.append(s_next)
        traj.objective_sequence.append(float(objectives[s_next]))
        traj.iterations += 1
        visited.add(s_next)
        s = s_next
        if gain < tol:
            traj.converged = True
            break
    return traj


def alt_minimize_multistart(
    p, table: FiniteCostTable, alpha: float, max_iter: int = 1000, tol: float = 1e-10
) -> tuple[AltMinTrajectory, list[AltMinTrajectory]]:
    """Start from every strategy; return the best trajectory and all runs."""
    runs = [
        alt_minimize_neg_moment(p, table, alpha, s0, max_iter=max_iter, tol=tol)
        for s0 in range(table.n_strategies)
    ]
    # max() keeps the first among equal objectives, i.e. the lowest start index
    best = max(runs, key=lambda r: r.final_objective)
    return best, runs


def brute_force_neg_moment(p, table: FiniteCostTable, alpha: float) -> tuple[int, float]:
    """Exhaustive maximizer of ``ln E exp(-alpha * cost)``; lowest index on ties."""
    p = _check(p, table)
    vals = _log_moments(p, table.costs, -alpha)
    best = int(np.argmax(vals))
    return best, float(vals[best])
