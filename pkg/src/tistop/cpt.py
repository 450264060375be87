"""Cumulative prospect theory preference over stopping states."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .lattice import (
    DomainError,
    Lattice,
    Node,
    Strategy,
    TerminalDistribution,
    check_normalized,
    terminal_masses,
)

# below this exponent the weighting function stops being monotone
DELTA_MIN = 0.278


class Preference(Protocol):
    """Value ``V_{t,x}`` of following a strategy from a node.

    ``evaluate_batch`` takes stop probabilities of shape ``(B, T+1, T+1)``
    and must agree with ``evaluate`` on each slice.
    """

    horizon: int

    def evaluate(self, origin: Node, s: Strategy) -> float: ...

    def evaluate_batch(self, origin: Node, probs: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class CptParams:
    alpha_plus: float = 0.9
    alpha_minus: float = 0.9
    delta_plus: float = 0.5
    delta_minus: float = 0.5
    lam: float = 1.5
    reference: float = 0.0

    def __post_init__(self):
        for name in ("alpha_plus", "alpha_minus"):
            a = getattr(self, name)
            if not 0.0 < a <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {a}")
        if self.lam < 1.0:
            raise DomainError(f"loss aversion must be >= 1, got {self.lam}")
        for name in ("delta_plus", "delta_minus"):
            d = getattr(self, name)
            if d <= 0.0:
                raise DomainError(f"{name} must be positive, got {d}")
            if not DELTA_MIN < d <= 1.0:
                warnings.warn(
                    f"{name}={d} outside ({DELTA_MIN}, 1]; the weighting function may not be monotone",
                    stacklevel=3,
                )

    @classmethod
    def symmetric(cls, alpha: float, delta: float, lam: float, reference: float = 0.0) -> "CptParams":
        return cls(alpha, alpha, delta, delta, lam, reference)


def utility(p: CptParams, x):
    """S-shaped utility around the reference point."""
    x = np.asarray(x, dtype=float)
    gain = x >= p.reference
    d = np.abs(x - p.reference)
    out = np.where(gain, d**p.alpha_plus, -p.lam * d**p.alpha_minus)
    return float(out) if out.ndim == 0 else out


def _weight(q, delta: float):
    q = np.clip(q, 0.0, 1.0)
    a = q**delta
    b = (1.0 - q) ** delta
    return a / (a + b) ** (1.0 / delta)


def weight(p: CptParams, q, side: str = "gain"):
    """Inverse-S probability weighting ``q^d / (q^d + (1-q)^d)^(1/d)``."""
    if side not in ("gain", "loss"):
        raise DomainError(f"side must be 'gain' or 'loss', got {side!r}")
    q = np.asarray(q, dtype=float)
    if np.any(q < 0.0) or np.any(q > 1.0) or np.any(np.isnan(q)):
        raise DomainError("probabilities passed to the weighting function must lie in [0, 1]")
    out = _weight(q, p.delta_plus if side == "gain" else p.delta_minus)
    return float(out) if out.ndim == 0 else out


def cpt_values(p: CptParams, masses: np.ndarray) -> np.ndarray:
    """Rank-dependent value of each row of ``masses`` (shape ``(B, 2T+1)``, states ``-T..T``)."""
    masses = np.atleast_2d(masses)
    T = (masses.shape[1] - 1) // 2
    states = np.arange(-T, T + 1)
    u = utility(p, states)
    gains = states >= p.reference
    total = np.zeros(masses.shape[0])
    if gains.any():
        g = masses[:, gains]
        # decumulative from the best outcome down
        tail = np.cumsum(g[:, ::-1], axis=1)[:, ::-1]
        wt = _weight(tail, p.delta_plus)
        dw = wt - np.concatenate([wt[:, 1:], np.zeros((wt.shape[0], 1))], axis=1)
        total += dw @ u[gains]
    if (~gains).any():
        lo = masses[:, ~gains]
        head = np.cumsum(lo, axis=1)
        wt = _weight(head, p.delta_minus)
        dw = wt - np.concatenate([np.zeros((wt.shape[0], 1)), wt[:, :-1]], axis=1)
        total += dw @ u[~gains]
    return total


def cpt_value(p: CptParams, d: TerminalDistribution) -> float:
    check_normalized(d.mass)
    return float(cpt_values(p, d.mass[None])[0])


@dataclass(frozen=True)
class CptPreference:
    """CPT value of the stopping-state distribution, reference fixed at the initial state."""

    params: CptParams
    horizon: int

    def evaluate(self, origin: Node, s: Strategy) -> float:
        if s.horizon != self.horizon:
            raise DomainError("strategy horizon does not match the preference horizon")
        Lattice(self.horizon).check_node(origin)
        return float(self.evaluate_batch(origin, s.probs[None])[0])

    def evaluate_batch(self, origin: Node, probs: np.ndarray) -> np.ndarray:
        return cpt_values(self.params, terminal_masses(self.horizon, origin, probs))


def evaluate(p: CptParams, lat: Lattice, origin: Node, s: Strategy) -> float:
    return CptPreference(p, lat.horizon).evaluate(origin, s)
