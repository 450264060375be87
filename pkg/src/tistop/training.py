"""Training rounds that turn a naive (or arbitrary) strategy into an intra-personal equilibrium."""
from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from .cpt import Preference
from .lattice import SNAP_TOL, DomainError, Lattice, Strategy, row_index, snap
from .solver import SolverConfig, best_response, naive_strategy, sophisticated_strategy

DEFAULT_TOL = 1e-6


class ConvergenceError(RuntimeError):
    """Training did not reach a fixed point within the allowed number of rounds."""

    def __init__(self, message: str, trace: "TrainingTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class TrainingTrace:
    """Actual strategies ``a^{N(0)}, a^{N(1)}, ...`` and the outcome of training.

    ``converged_round`` is ``None`` when no fixed point was reached. When
    converged, ``rounds`` ends with one confirming sweep that reproduces the
    fixed point.
    """

    rounds: tuple[Strategy, ...]
    root_values: tuple[float, ...]
    converged_round: int | None
    converged_to_sophisticated: bool
    sophisticated: Strategy | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.converged_round is not None

    @property
    def fixed_point(self) -> Strategy:
        return self.rounds[-1]


def strategies_equal(a: Strategy, b: Strategy, tol: float = DEFAULT_TOL) -> bool:
    if a.horizon != b.horizon:
        raise DomainError(f"cannot compare strategies on horizons {a.horizon} and {b.horizon}")
    mask = np.tril(np.ones(a.probs.shape, dtype=bool))
    diff = np.abs(snap(a.probs, SNAP_TOL) - snap(b.probs, SNAP_TOL))[mask]
    return bool(diff.max() <= tol)


def train_round(pref: Preference, prev: Strategy, cfg: SolverConfig, executor: Executor | None = None) -> Strategy:
    """One Jacobi sweep: every node best-responds to ``prev`` on all later times."""
    lat = Lattice(prev.horizon)
    if pref.horizon != prev.horizon:
        raise DomainError("strategy and preference horizons differ")
    nodes = [n for n in lat.nodes() if n[0] < lat.horizon]
    mapper = executor.map if executor is not None else map
    acts = list(mapper(lambda n: best_response(pref, n, prev, cfg)[0], nodes))
    probs = np.ones_like(prev.probs)
    for (t, x), p in zip(nodes, acts):
        probs[t, row_index(t, x)] = p
    return Strategy(prev.horizon, probs)


def train_until_fixed(
    pref: Preference,
    initial: Strategy,
    cfg: SolverConfig,
    max_rounds: int | None = None,
    tol: float = DEFAULT_TOL,
    sophisticated: Strategy | None = None,
    executor: Executor | None = None,
) -> TrainingTrace:
    """Apply training rounds until the actual strategy stops changing.

    Up to ``max_rounds`` rounds are counted; one further sweep is allowed so
    that a fixed point reached exactly at ``max_rounds`` is recognised.
    """
    T = initial.horizon
    if max_rounds is None:
        max_rounds = 4 * (T + 1)
    if sophisticated is None:
        sophisticated = sophisticated_strategy(pref, Lattice(T), cfg)
    rounds = [initial]
    converged = None
    for k in range(1, max_rounds + 2):
        nxt = train_round(pref, rounds[-1], cfg, executor)
        rounds.append(nxt)
        if strategies_equal(nxt, rounds[-2], tol):
            converged = k - 1
            break
    if converged is not None:
        fixed = rounds[-1]
        while converged > 0 and strategies_equal(rounds[converged - 1], fixed, tol):
            converged -= 1
    values = tuple(pref.evaluate((0, 0), s) for s in rounds)
    return TrainingTrace(
        rounds=tuple(rounds),
        root_values=values,
        converged_round=converged,
        converged_to_sophisticated=converged is not None and strategies_equal(rounds[-1], sophisticated, tol),
        sophisticated=sophisticated,
    )


def inconsistency_measure(
    pref: Preference,
    lat: Lattice,
    cfg: SolverConfig,
    naive: Strategy | None = None,
    executor: Executor | None = None,
) -> int:
    """Rounds of training needed to turn the naive strategy into the sophisticated one."""
    trace = measure_trace(pref, lat, cfg, naive, executor)
    return trace.converged_round


def measure_trace(
    pref: Preference,
    lat: Lattice,
    cfg: SolverConfig,
    naive: Strategy | None = None,
    executor: Executor | None = None,
) -> TrainingTrace:
    """Training trace from the naive strategy, capped at ``T - 1`` rounds.

    Raises
    ------
    ConvergenceError
        If the naive strategy is not trained into the sophisticated one within
        ``T - 1`` rounds, which can only be a numerical failure.
    """
    if naive is None:
        naive = naive_strategy(pref, lat, cfg, executor)
    trace = train_until_fixed(pref, naive, cfg, max_rounds=max(lat.horizon - 1, 0), executor=executor)
    if not trace.converged or trace.converged_round > max(lat.horizon - 1, 0) or not trace.converged_to_sophisticated:
        raise ConvergenceError(
            f"naive strategy not trained into the sophisticated one within {lat.horizon - 1} rounds", trace
        )
    return trace
