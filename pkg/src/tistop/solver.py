"""Per-node optimization and the naive, sophisticated and pre-committed agents."""
from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .cpt import Preference
from .lattice import DomainError, Lattice, Node, Strategy, row_index

RANDOMIZED = "randomized"
PURE = "pure"

# coarse global grid and local stencil used by coordinate ascent
_COARSE = np.linspace(0.0, 1.0, 33)
_STENCIL = np.linspace(-1.0, 1.0, 9)
_ENUM_CHUNK = 1 << 13


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings shared by every solver routine.

    ``max_inner_iterations`` caps the coordinate-ascent sweeps of the subtree
    optimizer; ``enumeration_limit`` is the largest free-node count for which
    all pure strategies are enumerated.
    """

    grid_resolution: int = 2001
    refine_tolerance: float = 1e-9
    multistart_count: int = 32
    rng_seed: int = 12345
    max_inner_iterations: int = 200
    mode: str = RANDOMIZED
    enumeration_limit: int = 20
    tie_tolerance: float = 1e-12

    def __post_init__(self):
        if self.grid_resolution < 3:
            raise DomainError("grid_resolution must be >= 3")
        if self.refine_tolerance <= 0:
            raise DomainError("refine_tolerance must be positive")
        if self.multistart_count < 1:
            raise DomainError("multistart_count must be >= 1")
        if self.mode not in (RANDOMIZED, PURE):
            raise DomainError(f"mode must be {RANDOMIZED!r} or {PURE!r}, got {self.mode!r}")

    @property
    def pure(self) -> bool:
        return self.mode == PURE

    def with_mode(self, mode: str) -> "SolverConfig":
        return replace(self, mode=mode)


@dataclass(frozen=True, eq=False)
class NodePlan:
    origin: Node
    actions: Strategy
    value: float

    @property
    def action(self) -> float:
        return self.actions[self.origin]


def _tie(cfg: SolverConfig, value: float) -> float:
    return cfg.tie_tolerance * max(1.0, abs(value))


def _check_pref(pref: Preference, s: Strategy | None = None) -> Lattice:
    lat = Lattice(pref.horizon)
    if s is not None and s.horizon != pref.horizon:
        raise DomainError(f"strategy horizon {s.horizon} does not match preference horizon {pref.horizon}")
    return lat


def best_response(pref: Preference, origin: Node, future: Strategy, cfg: SolverConfig) -> tuple[float, float]:
    """Best stop probability at ``origin`` with every later action pinned to ``future``.

    Returns ``(p, value)``. Ties go to the larger stop probability.
    """
    lat = _check_pref(pref, future)
    t, x = lat.check_node(origin)
    if t == lat.horizon:
        return 1.0, pref.evaluate(origin, future)
    i = row_index(t, x)
    base = future.probs

    def values(ps) -> np.ndarray:
        ps = np.asarray(ps, dtype=float)
        probs = np.broadcast_to(base, (ps.size,) + base.shape).copy()
        probs[:, t, i] = ps
        return pref.evaluate_batch(origin, probs)

    if cfg.pure:
        v0, v1 = values([0.0, 1.0])
        return (1.0, float(v1)) if v1 >= v0 - _tie(cfg, v0) else (0.0, float(v0))

    grid = np.linspace(0.0, 1.0, cfg.grid_resolution)
    vals = values(grid)
    vmax = float(vals.max())
    k = int(np.flatnonzero(vals >= vmax - _tie(cfg, vmax))[-1])
    p_best, v_best = float(grid[k]), float(vals[k])

    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(
        lambda p: -values([p])[0],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": cfg.refine_tolerance},
    )
    p_ref = float(np.clip(res.x, 0.0, 1.0))
    v_ref = float(values([p_ref])[0])
    if v_ref > v_best + _tie(cfg, v_best):
        p_best, v_best = p_ref, v_ref
    return p_best, v_best


class _Subproblem:
    """Objective over the free (non-terminal) nodes of the subtree at ``origin``."""

    def __init__(self, pref: Preference, origin: Node):
        self.pref = pref
        self.origin = origin
        self.lattice = Lattice(pref.horizon)
        self.nodes = self.lattice.free_nodes(origin)
        self.ts = np.array([n[0] for n in self.nodes], dtype=int)
        self.cols = np.array([row_index(*n) for n in self.nodes], dtype=int)
        T = pref.horizon
        self.base = np.ones((T + 1, T + 1))

    @property
    def size(self) -> int:
        return len(self.nodes)

    def probs(self, Z: np.ndarray) -> np.ndarray:
        Z = np.atleast_2d(Z)
        out = np.broadcast_to(self.base, (Z.shape[0],) + self.base.shape).copy()
        out[:, self.ts, self.cols] = Z
        return out

    def __call__(self, Z: np.ndarray) -> np.ndarray:
        return self.pref.evaluate_batch(self.origin, self.probs(Z))

    def strategy(self, z: np.ndarray) -> Strategy:
        return Strategy(self.pref.horizon, self.probs(z)[0])

    def time_threshold_starts(self) -> np.ndarray:
        """Stop at every node from time ``s`` on, one start per ``s``."""
        t0 = self.origin[0]
        return np.array([(self.ts >= s).astype(float) for s in range(t0, self.pref.horizon)])


def enumerate_pure(sub: _Subproblem, cfg: SolverConfig, keep: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive search over all pure plans of a subproblem.

    Plans are visited in descending lexicographic order (origin first, 1 before 0),
    so among equal values the plan stopping earliest in row-major order wins.
    Returns the ``keep`` best plans (best first) and their values.
    """
    n = sub.size
    shifts = np.arange(n - 1, -1, -1)
    top_z = np.empty((0, n))
    top_v = np.empty(0)
    total = 1 << n
    for start in range(total - 1, -1, -_ENUM_CHUNK):
        ms = np.arange(start, max(start - _ENUM_CHUNK, -1), -1)
        Z = ((ms[:, None] >> shifts) & 1).astype(float)
        v = sub(Z)
        # stable merge keeps enumeration order among ties
        cand_z = np.concatenate([top_z, Z])
        cand_v = np.concatenate([top_v, v])
        order = _rank(cand_v, cfg)[:keep]
        top_z, top_v = cand_z[order], cand_v[order]
    return top_z, top_v


def _rank(v: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Indices sorted by value descending; values within the tie tolerance of the max keep input order."""
    vmax = float(v.max())
    tied = np.flatnonzero(v >= vmax - _tie(cfg, vmax))
    rest = np.setdiff1d(np.arange(v.size), tied, assume_unique=True)
    rest = rest[np.argsort(-v[rest], kind="stable")]
    return np.concatenate([tied, rest])


def _coordinate_ascent(sub: _Subproblem, Z: np.ndarray, cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    """Projected coordinate ascent run on all starts at once.

    Each coordinate step scans a local stencil of half-width ``h`` (plus a
    coarse global grid while ``h`` is at its initial size); ``h`` shrinks
    whenever a full sweep brings no improvement. Starts that have merged are
    dropped after every sweep.
    """
    Z = Z.copy()
    n = Z.shape[1]
    vals = sub(Z)
    h0 = h = 1.0 / (_COARSE.size - 1)
    candidates = [0.0, 1.0] if cfg.pure else None
    for _ in range(cfg.max_inner_iterations):
        improved = False
        S = Z.shape[0]
        for k in range(n):
            if candidates is not None:
                C = np.broadcast_to(np.array(candidates), (S, 2))
            else:
                C = np.clip(Z[:, k, None] + h * _STENCIL, 0.0, 1.0)
                if h == h0:
                    C = np.concatenate([np.broadcast_to(_COARSE, (S, _COARSE.size)), C], axis=1)
            m = C.shape[1]
            trial = np.repeat(Z, m, axis=0)
            trial[:, k] = C.ravel()
            v = sub(trial).reshape(S, m)
            j = np.argmax(v, axis=1)
            vb = v[np.arange(S), j]
            better = vb > vals + 1e-15 * np.maximum(1.0, np.abs(vals))
            if better.any():
                improved = True
                Z[better, k] = C[better, j[better]]
                vals[better] = vb[better]
        _, keep = np.unique(Z, axis=0, return_index=True)
        keep.sort()
        Z, vals = Z[keep], vals[keep]
        if not improved:
            if candidates is not None:
                break
            h /= 4.0
            if h < cfg.refine_tolerance:
                break
    return Z, vals


def _unreachable_to_stop(sub: _Subproblem, z: np.ndarray) -> np.ndarray:
    """Set actions at nodes the plan never reaches to 1; the plan value is unchanged."""
    T = sub.pref.horizon
    probs = sub.probs(z)[0]
    t0, x0 = sub.origin
    reach = np.zeros(T + 1)
    reach[row_index(t0, x0)] = 1.0
    out = z.copy()
    col = {n: k for k, n in enumerate(sub.nodes)}
    for t in range(t0, T):
        for i in range(t + 1):
            k = col.get((t, t - 2 * i))
            if k is not None and reach[i] == 0.0:
                out[k] = 1.0
        cont = reach[: t + 1] * (1.0 - probs[t, : t + 1]) * 0.5
        nxt = np.zeros(T + 1)
        nxt[: t + 1] += cont
        nxt[1 : t + 2] += cont
        reach = nxt
    return out


def optimize_subtree(pref: Preference, origin: Node, cfg: SolverConfig) -> NodePlan:
    """Maximize ``V_origin`` over every non-terminal action of the subtree.

    Pure mode enumerates all pure plans when there are at most
    ``cfg.enumeration_limit`` free nodes. Randomized mode runs multistart
    coordinate ascent from all-stop, all-continue, time-threshold plans, the
    best enumerated pure plans and seeded random points.
    """
    lat = _check_pref(pref)
    origin = lat.check_node(origin)
    sub = _Subproblem(pref, origin)
    if sub.size == 0:
        s = Strategy.constant(pref.horizon, 1.0)
        return NodePlan(origin, s, pref.evaluate(origin, s))
    if sub.size == 1:
        p, _ = best_response(pref, origin, Strategy.constant(pref.horizon, 1.0), cfg)
        s = sub.strategy(np.array([p]))
        return NodePlan(origin, s, pref.evaluate(origin, s))

    n = sub.size
    enumerable = n <= cfg.enumeration_limit
    top = np.empty((0, n))
    if enumerable:
        top, _ = enumerate_pure(sub, cfg, keep=1 if cfg.pure else 4)
    if cfg.pure and enumerable:
        z = top[0]
    else:
        t0, x0 = origin
        rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, t0, x0 + pref.horizon]))
        starts = [np.ones((1, n)), np.zeros((1, n)), sub.time_threshold_starts(), top]
        if not cfg.pure:
            starts.append(np.full((1, n), 0.5))
        Z0 = np.unique(np.concatenate(starts), axis=0)[::-1]
        extra = cfg.multistart_count - Z0.shape[0]
        if extra > 0:
            R = rng.random((extra, n))
            Z0 = np.concatenate([Z0, np.round(R) if cfg.pure else R])
        Z, vals = _coordinate_ascent(sub, Z0, cfg)
        order = _rank(vals, cfg)
        tied = order[vals[order] >= vals[order[0]] - _tie(cfg, float(vals[order[0]]))]
        # among tied optima prefer the largest stop probability at the origin
        z = Z[tied[np.argmax(Z[tied, 0])]]
        stop_now = z.copy()
        stop_now[0] = 1.0
        v_stop, v_best = sub(np.stack([stop_now, z]))
        if v_stop >= v_best - _tie(cfg, float(v_best)):
            z = stop_now
    z = _unreachable_to_stop(sub, z)
    s = sub.strategy(z)
    return NodePlan(origin, s, pref.evaluate(origin, s))


def naive_strategy(pref: Preference, lat: Lattice, cfg: SolverConfig, executor: Executor | None = None) -> Strategy:
    """Actual strategy of an agent who re-plans at every node and implements only the first action."""
    if lat.horizon != pref.horizon:
        raise DomainError("lattice and preference horizons differ")
    nodes = [n for n in lat.nodes() if n[0] < lat.horizon]
    mapper = executor.map if executor is not None else map
    plans = list(mapper(lambda n: optimize_subtree(pref, n, cfg), nodes))
    return Strategy.from_mapping(lat.horizon, {p.origin: p.action for p in plans})


def sophisticated_strategy(pref: Preference, lat: Lattice, cfg: SolverConfig) -> Strategy:
    """Backward induction: each node best-responds to the equilibrium actions already fixed after it."""
    if lat.horizon != pref.horizon:
        raise DomainError("lattice and preference horizons differ")
    s = Strategy.constant(lat.horizon, 1.0)
    for t in range(lat.horizon - 1, -1, -1):
        row = {n: best_response(pref, n, s, cfg)[0] for n in lat.row(t)}
        probs = s.probs.copy()
        for (tt, x), p in row.items():
            probs[tt, row_index(tt, x)] = p
        s = Strategy(lat.horizon, probs)
    return s


def precommitted_strategy(pref: Preference, lat: Lattice, cfg: SolverConfig) -> NodePlan:
    if lat.horizon != pref.horizon:
        raise DomainError("lattice and preference horizons differ")
    return optimize_subtree(pref, (0, 0), cfg)
