"""Present-biased stopping with an immediate cost or an immediate reward.

Both problems are state-independent, so strategies collapse to one stop
probability per time. The closed-form round counts and strategy traces here
serve as oracles for the generic lattice engine, which sees these problems
only through :class:`CostPreference` / :class:`RewardPreference`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import (
    DomainError,
    Lattice,
    Node,
    StoppingTimeDistribution,
    Strategy,
    check_normalized,
    stopping_time_masses,
)

# ratios within this distance of an integer are treated as that integer
_INT_SNAP = 1e-9


@dataclass(frozen=True)
class ImmediateCostParams:
    """Stopping now costs ``c`` at once while the reward ``v`` (less ``k`` per period waited) arrives later."""

    beta: float
    v: float
    c: float
    k: float
    T: int

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")
        if self.v <= 0 or self.c <= 0 or self.k <= 0:
            raise DomainError("v, c and k must be positive")
        if int(self.T) != self.T or self.T < 1:
            raise DomainError(f"T must be a positive integer, got {self.T}")
        if not self.k < self.v / self.T:
            raise DomainError(f"k={self.k} must be below v/T={self.v / self.T} to keep the reward positive")


@dataclass(frozen=True)
class ImmediateRewardParams:
    """Stopping at time ``s`` pays ``theta**(T - s) * v``; anything after today is discounted by ``beta``."""

    beta: float
    theta: float
    v: float
    T: int

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")
        if not 0.0 < self.theta < 1.0:
            raise DomainError(f"theta must lie in (0, 1), got {self.theta}")
        if self.v <= 0:
            raise DomainError("v must be positive")
        if int(self.T) != self.T or self.T < 1:
            raise DomainError(f"T must be a positive integer, got {self.T}")


def _masses(a, T: int, t: int) -> np.ndarray:
    m = a.mass if isinstance(a, StoppingTimeDistribution) else np.asarray(a, dtype=float)
    if not 0 <= t <= T:
        raise DomainError(f"time {t} outside [0, {T}]")
    if m.shape[-1] != T - t + 1:
        raise DomainError(f"stopping-time distribution at time {t} needs {T - t + 1} entries, got {m.shape[-1]}")
    return m


def cost_coefficients(p: ImmediateCostParams, t: int) -> np.ndarray:
    j = np.arange(p.T - t + 1)
    coef = p.beta * (p.v - j * p.k - p.c)
    coef[0] = p.beta * p.v - p.c
    return coef


def reward_coefficients(p: ImmediateRewardParams, t: int) -> np.ndarray:
    j = np.arange(p.T - t + 1)
    coef = p.beta * p.theta ** (p.T - t - j) * p.v
    coef[0] = p.theta ** (p.T - t) * p.v
    return coef


def cost_value(p: ImmediateCostParams, t: int, a) -> float:
    """Value at time ``t`` of stopping ``j`` periods later with probability ``a[j]``."""
    m = check_normalized(_masses(a, p.T, t))
    return float(m @ cost_coefficients(p, t) - p.beta * t * p.k)


def reward_value(p: ImmediateRewardParams, t: int, a) -> float:
    m = check_normalized(_masses(a, p.T, t))
    return float(m @ reward_coefficients(p, t))


def _ceil(r: float) -> int:
    n = round(r)
    return int(n) if abs(r - n) <= _INT_SNAP * max(1.0, abs(r)) else math.ceil(r)


def _floor(r: float) -> int:
    n = round(r)
    return int(n) if abs(r - n) <= _INT_SNAP * max(1.0, abs(r)) else math.floor(r)


def cost_is_time_inconsistent(p: ImmediateCostParams) -> bool:
    return (1 - p.beta) * p.c > p.beta * p.k


def rho(p: ImmediateCostParams) -> int:
    """Smallest waiting time after which the cost-averse naive agent would rather stop now."""
    if not cost_is_time_inconsistent(p):
        raise DomainError("rho requires (1 - beta) c > beta k")
    return _ceil((1 - p.beta) * p.c / (p.beta * p.k))


def nu(p: ImmediateRewardParams) -> int:
    """Largest horizon over which the immediate reward is still worth taking now."""
    if not p.theta >= p.beta > p.theta**p.T:
        raise DomainError("nu requires theta >= beta > theta**T")
    return _floor(math.log(p.beta) / math.log(p.theta))


def cost_round_count(p: ImmediateCostParams) -> int:
    """Round count stated in closed form, ``2 (ceil((T + 1) / rho) - 1)``; 0 when time-consistent."""
    if not cost_is_time_inconsistent(p):
        return 0
    return 2 * (math.ceil((p.T + 1) / rho(p)) - 1)


def reward_round_count(p: ImmediateRewardParams) -> int:
    """Round count stated in closed form, ``ceil(T / nu)``; 0 in the two time-consistent regimes."""
    if p.theta**p.T >= p.beta or p.theta < p.beta:
        return 0
    return math.ceil(p.T / nu(p))


def _next_stop(prev: np.ndarray, t: int) -> int:
    return t + 1 + int(np.flatnonzero(prev[t + 1 :] == 1.0)[0])


def cost_trace(p: ImmediateCostParams) -> list[np.ndarray]:
    """Pure time strategies ``a^{N(0)}, a^{N(1)}, ...`` up to the sophisticated one.

    At every time the agent compares stopping now with waiting for the next
    stop her later selves actually make ``d`` periods ahead; she stops iff
    ``d >= rho``. The naive start stops only at ``T``.
    """
    if not cost_is_time_inconsistent(p):
        raise DomainError("cost_trace requires (1 - beta) c > beta k")
    r = rho(p)
    T = p.T
    cur = np.zeros(T + 1)
    cur[T] = 1.0
    trace = [cur]
    while True:
        nxt = np.ones(T + 1)
        for t in range(T):
            nxt[t] = 1.0 if _next_stop(cur, t) - t >= r else 0.0
        if np.array_equal(nxt, cur):
            return trace
        trace.append(nxt)
        cur = nxt


def reward_trace(p: ImmediateRewardParams) -> list[np.ndarray]:
    """Pure time strategies from the naive one to the sophisticated all-stop strategy.

    The agent stops now iff her next actual stop is at most ``nu`` periods away;
    the naive start stops exactly when at most ``nu`` periods remain.
    """
    n = nu(p)
    T = p.T
    cur = np.array([1.0 if T - t <= n else 0.0 for t in range(T + 1)])
    trace = [cur]
    while True:
        nxt = np.ones(T + 1)
        for t in range(T):
            nxt[t] = 1.0 if _next_stop(cur, t) - t <= n else 0.0
        if np.array_equal(nxt, cur):
            return trace
        trace.append(nxt)
        cur = nxt


def cost_sophisticated(p: ImmediateCostParams) -> np.ndarray:
    """Periodic equilibrium: stop at ``T``, ``T - rho``, ``T - 2 rho``, ... (all-stop if time-consistent)."""
    if not cost_is_time_inconsistent(p):
        return np.ones(p.T + 1)
    r = rho(p)
    return np.array([1.0 if (p.T - t) % r == 0 else 0.0 for t in range(p.T + 1)])


@dataclass(frozen=True)
class CostPreference:
    """Lattice adapter: the value depends on a strategy only through its stopping-time law."""

    params: ImmediateCostParams

    @property
    def horizon(self) -> int:
        return self.params.T

    def evaluate(self, origin: Node, s: Strategy) -> float:
        if s.horizon != self.horizon:
            raise DomainError("strategy horizon does not match the preference horizon")
        Lattice(self.horizon).check_node(origin)
        return float(self.evaluate_batch(origin, s.probs[None])[0])

    def evaluate_batch(self, origin: Node, probs: np.ndarray) -> np.ndarray:
        t = origin[0]
        m = stopping_time_masses(self.horizon, origin, probs)
        return m @ cost_coefficients(self.params, t) - self.params.beta * t * self.params.k


@dataclass(frozen=True)
class RewardPreference:
    params: ImmediateRewardParams

    @property
    def horizon(self) -> int:
        return self.params.T

    def evaluate(self, origin: Node, s: Strategy) -> float:
        if s.horizon != self.horizon:
            raise DomainError("strategy horizon does not match the preference horizon")
        Lattice(self.horizon).check_node(origin)
        return float(self.evaluate_batch(origin, s.probs[None])[0])

    def evaluate_batch(self, origin: Node, probs: np.ndarray) -> np.ndarray:
        m = stopping_time_masses(self.horizon, origin, probs)
        return m @ reward_coefficients(self.params, origin[0])
