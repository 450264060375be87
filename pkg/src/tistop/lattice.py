"""Binomial lattice of the simple symmetric random walk and randomized stopping strategies.

Nodes are ``(t, x)`` pairs with ``0 <= t <= T``, ``|x| <= t`` and ``t + x`` even.
Within a time row, nodes are stored by the row index ``i = (t - x) // 2`` so
that ``i = 0`` is the top state ``x = t``; this is the row-major order used
everywhere (t ascending, x descending).

Batch routines take stop-probability arrays of shape ``(B, T + 1, T + 1)``
where ``probs[b, t, i]`` is the stop probability at node ``(t, t - 2 i)``.
Entries with ``i > t`` are padding and never read.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

import numpy as np

SNAP_TOL = 1e-9


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


Node = tuple[int, int]


def row_index(t: int, x: int) -> int:
    return (t - x) // 2


def row_state(t: int, i: int) -> int:
    return t - 2 * i


def subtree_size(T: int, t: int) -> int:
    """Number of nodes in the subtree rooted at any node of time ``t``."""
    if not 0 <= t <= T:
        raise DomainError(f"time {t} outside [0, {T}]")
    return (T - t + 1) * (T - t + 2) // 2


@dataclass(frozen=True)
class Lattice:
    """A ``T``-period symmetric binomial tree."""

    horizon: int

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise DomainError(f"horizon must be an integer >= 1, got {self.horizon!r}")

    @property
    def T(self) -> int:
        return self.horizon

    def is_node(self, t: int, x: int) -> bool:
        return 0 <= t <= self.horizon and abs(x) <= t and (t + x) % 2 == 0

    def check_node(self, node: Node) -> Node:
        t, x = node
        if not self.is_node(t, x):
            raise DomainError(f"{node!r} is not a node of the {self.horizon}-period lattice")
        return int(t), int(x)

    def nodes(self) -> Iterator[Node]:
        """All nodes, row-major."""
        for t in range(self.horizon + 1):
            for i in range(t + 1):
                yield t, row_state(t, i)

    def row(self, t: int) -> list[Node]:
        return [(t, row_state(t, i)) for i in range(t + 1)]

    def in_subtree(self, origin: Node, node: Node) -> bool:
        t0, x0 = origin
        s, y = node
        return self.is_node(s, y) and s >= t0 and abs(y - x0) <= s - t0

    def subtree(self, origin: Node) -> list[Node]:
        """Nodes reachable from ``origin`` (origin included), row-major."""
        t0, x0 = self.check_node(origin)
        out = []
        for s in range(t0, self.horizon + 1):
            d = s - t0
            out.extend((s, y) for y in range(x0 + d, x0 - d - 1, -2))
        return out

    def free_nodes(self, origin: Node) -> list[Node]:
        """Non-terminal nodes of the subtree at ``origin``."""
        return [n for n in self.subtree(origin) if n[0] < self.horizon]

    def flat_index_to_node(self, origin: Node, j: int) -> Node:
        """Node corresponding to the ``j``-th (1-based) coordinate of a plan made at ``origin``.

        The time ``s`` is the unique solution of
        ``(s-t)(s-t+1)/2 < j <= (s-t+1)(s-t+2)/2``; the state is
        ``s - 2j + (s-t)(s-t+1) + 2`` shifted by ``x - t`` so that the block
        for time ``s`` is centred on the origin state.
        """
        t, x = self.check_node(origin)
        n = subtree_size(self.horizon, t)
        if not 1 <= j <= n:
            raise DomainError(f"flat index {j} outside [1, {n}]")
        d = 0
        while not (d * (d + 1) // 2 < j <= (d + 1) * (d + 2) // 2):
            d += 1
        s = t + d
        y = s - 2 * j + d * (d + 1) + 2
        return s, y + (x - t)


@dataclass(frozen=True, eq=False)
class Strategy:
    """Stop probabilities on every node of a lattice; the terminal row is always 1."""

    horizon: int
    probs: np.ndarray

    def __post_init__(self):
        T = self.horizon
        p = np.array(self.probs, dtype=float)
        if p.shape != (T + 1, T + 1):
            raise DomainError(f"probability table must have shape {(T + 1, T + 1)}, got {p.shape}")
        mask = _valid_mask(T)
        vals = p[mask]
        if np.any(~np.isfinite(vals)) or np.any(vals < 0.0) or np.any(vals > 1.0):
            raise DomainError("stop probabilities must lie in [0, 1]")
        p[~mask] = 1.0
        p[T, :] = 1.0
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def constant(cls, horizon: int, p: float) -> "Strategy":
        return cls(horizon, np.full((horizon + 1, horizon + 1), float(p)))

    @classmethod
    def from_function(cls, horizon: int, fn: Callable[[int, int], float]) -> "Strategy":
        p = np.ones((horizon + 1, horizon + 1))
        for t in range(horizon):
            for i in range(t + 1):
                p[t, i] = fn(t, row_state(t, i))
        return cls(horizon, p)

    @classmethod
    def from_mapping(cls, horizon: int, mapping: Mapping[Node, float]) -> "Strategy":
        lat = Lattice(horizon)
        p = np.ones((horizon + 1, horizon + 1))
        for (t, x), v in mapping.items():
            lat.check_node((t, x))
            p[t, row_index(t, x)] = v
        return cls(horizon, p)

    @classmethod
    def from_time_vector(cls, vector) -> "Strategy":
        """State-independent strategy stopping with ``vector[t]`` at every node of time ``t``."""
        v = np.asarray(vector, dtype=float)
        T = len(v) - 1
        return cls(T, np.repeat(v[:, None], T + 1, axis=1))

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.horizon)

    def __getitem__(self, node: Node) -> float:
        t, x = self.lattice.check_node(node)
        return float(self.probs[t, row_index(t, x)])

    def with_action(self, node: Node, p: float) -> "Strategy":
        t, x = self.lattice.check_node(node)
        q = self.probs.copy()
        q[t, row_index(t, x)] = p
        return Strategy(self.horizon, q)

    def items(self) -> Iterator[tuple[Node, float]]:
        for t, x in self.lattice.nodes():
            yield (t, x), float(self.probs[t, row_index(t, x)])

    def snapped(self, tol: float = SNAP_TOL) -> "Strategy":
        return Strategy(self.horizon, snap(self.probs, tol))

    def is_pure(self) -> bool:
        vals = self.probs[_valid_mask(self.horizon)]
        return bool(np.all((vals == 0.0) | (vals == 1.0)))

    def time_vector(self, atol: float = 0.0) -> np.ndarray | None:
        """Per-time stop probabilities if the strategy is state-independent, else ``None``."""
        out = np.empty(self.horizon + 1)
        for t in range(self.horizon + 1):
            row = self.probs[t, : t + 1]
            if np.max(row) - np.min(row) > atol:
                return None
            out[t] = row[0]
        return out

    def __repr__(self) -> str:
        return f"Strategy(horizon={self.horizon}, probs={self.probs.tolist()!r})"


def snap(values, tol: float = SNAP_TOL):
    """Round values within ``tol`` of 0 or 1 to exactly 0 or 1."""
    v = np.array(values, dtype=float)
    v[np.abs(v) <= tol] = 0.0
    v[np.abs(v - 1.0) <= tol] = 1.0
    return v


def _valid_mask(T: int) -> np.ndarray:
    return np.tril(np.ones((T + 1, T + 1), dtype=bool))


@dataclass(frozen=True, eq=False)
class TerminalDistribution:
    """Probability of stopping in each state ``-T..T``; ``mass[n + T]`` is state ``n``."""

    horizon: int
    mass: np.ndarray

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        if m.shape != (2 * self.horizon + 1,):
            raise DomainError(f"mass vector must have length {2 * self.horizon + 1}")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @classmethod
    def from_mapping(cls, horizon: int, mapping: Mapping[int, float]) -> "TerminalDistribution":
        m = np.zeros(2 * horizon + 1)
        for n, v in mapping.items():
            if abs(n) > horizon:
                raise DomainError(f"state {n} outside [-{horizon}, {horizon}]")
            m[n + horizon] += v
        return cls(horizon, m)

    @property
    def states(self) -> np.ndarray:
        return np.arange(-self.horizon, self.horizon + 1)

    def __getitem__(self, n: int) -> float:
        if abs(n) > self.horizon:
            return 0.0
        return float(self.mass[n + self.horizon])

    def as_dict(self, drop_zero: bool = True) -> dict[int, float]:
        return {int(n): float(m) for n, m in zip(self.states, self.mass) if m != 0.0 or not drop_zero}

    def mean(self) -> float:
        return float(self.states @ self.mass)


@dataclass(frozen=True, eq=False)
class StoppingTimeDistribution:
    """Probability of stopping ``j`` periods after the origin, ``j = 0..T - t``."""

    mass: np.ndarray

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise DomainError("stopping-time masses must be a non-empty vector")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @classmethod
    def point(cls, length: int, j: int) -> "StoppingTimeDistribution":
        m = np.zeros(length)
        m[j] = 1.0
        return cls(m)

    def __getitem__(self, j: int) -> float:
        return float(self.mass[j]) if 0 <= j < self.mass.size else 0.0

    def as_dict(self) -> dict[int, float]:
        return {j: float(m) for j, m in enumerate(self.mass) if m != 0.0}


# ---------------------------------------------------------------------------
# forward induction


def _forward(T: int, origin: Node, probs: np.ndarray):
    """Yield ``(t, reach, stop)`` per time row for a batch of strategies.

    ``reach`` and ``stop`` have shape ``(B, t + 1)`` indexed by row index.
    """
    t0, x0 = origin
    B = probs.shape[0]
    reach = np.zeros((B, t0 + 1))
    reach[:, row_index(t0, x0)] = 1.0
    for t in range(t0, T + 1):
        p = probs[:, t, : t + 1] if t < T else 1.0
        stop = reach * p
        yield t, reach, stop
        if t == T:
            break
        half = 0.5 * (reach - stop)
        nxt = np.zeros((B, t + 2))
        nxt[:, :-1] += half
        nxt[:, 1:] += half
        reach = nxt


def _as_batch(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    return p[None] if p.ndim == 2 else p


def terminal_masses(T: int, origin: Node, probs) -> np.ndarray:
    """Batch terminal distributions, shape ``(B, 2T + 1)``, column ``n + T`` is state ``n``."""
    p = _as_batch(probs)
    out = np.zeros((p.shape[0], 2 * T + 1))
    for t, _, stop in _forward(T, origin, p):
        # state t - 2i sits in column T + t - 2i
        out[:, T + t :: -2][:, : t + 1] += stop
    return out


def stopping_time_masses(T: int, origin: Node, probs) -> np.ndarray:
    """Batch stopping-time distributions, shape ``(B, T - t0 + 1)``."""
    p = _as_batch(probs)
    t0 = origin[0]
    out = np.zeros((p.shape[0], T - t0 + 1))
    for t, _, stop in _forward(T, origin, p):
        out[:, t - t0] = stop.sum(axis=1)
    return out


def _check(lat: Lattice, origin: Node, s: Strategy) -> Node:
    if s.horizon != lat.horizon:
        raise DomainError(f"strategy horizon {s.horizon} does not match lattice horizon {lat.horizon}")
    return lat.check_node(origin)


def reach_probabilities(lat: Lattice, origin: Node, s: Strategy) -> dict[Node, float]:
    """Probability of arriving at each node of the subtree without having stopped earlier."""
    origin = _check(lat, origin, s)
    out: dict[Node, float] = {}
    for t, reach, _ in _forward(lat.horizon, origin, s.probs[None]):
        for i in range(t + 1):
            if lat.in_subtree(origin, (t, row_state(t, i))):
                out[(t, row_state(t, i))] = float(reach[0, i])
    return out


def terminal_distribution(lat: Lattice, origin: Node, s: Strategy) -> TerminalDistribution:
    origin = _check(lat, origin, s)
    return TerminalDistribution(lat.horizon, terminal_masses(lat.horizon, origin, s.probs)[0])


def stopping_time_distribution(lat: Lattice, origin: Node, s: Strategy) -> StoppingTimeDistribution:
    origin = _check(lat, origin, s)
    return StoppingTimeDistribution(stopping_time_masses(lat.horizon, origin, s.probs)[0])


def check_normalized(mass, tol: float = 1e-9) -> np.ndarray:
    m = np.asarray(mass, dtype=float)
    if np.any(m < -tol) or not math.isclose(float(m.sum()), 1.0, rel_tol=0.0, abs_tol=tol):
        raise DomainError(f"distribution is not normalized (total mass {float(m.sum())!r})")
    return m
