"""JSON documents for strategies and training traces.

Probabilities are written with Python's shortest round-trip ``repr``, so a
strategy read back compares equal at zero tolerance.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .lattice import DomainError, Strategy
from .training import TrainingTrace


def strategy_to_dict(s: Strategy) -> dict:
    return {
        "horizon": s.horizon,
        "nodes": [{"t": t, "x": x, "p": p} for (t, x), p in s.items()],
    }


def strategy_from_dict(doc: dict) -> Strategy:
    try:
        T = int(doc["horizon"])
        mapping = {(int(r["t"]), int(r["x"])): float(r["p"]) for r in doc["nodes"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed strategy document: {exc}") from exc
    expected = (T + 1) * (T + 2) // 2
    if len(mapping) != expected:
        raise DomainError(f"strategy document lists {len(mapping)} nodes, expected {expected}")
    return Strategy.from_mapping(T, mapping)


def time_strategy_to_dict(vector) -> dict:
    v = np.asarray(vector, dtype=float)
    return {"horizon": int(v.size - 1), "times": [{"t": t, "p": float(p)} for t, p in enumerate(v)]}


def time_strategy_from_dict(doc: dict) -> np.ndarray:
    rows = sorted(doc["times"], key=lambda r: r["t"])
    if [r["t"] for r in rows] != list(range(int(doc["horizon"]) + 1)):
        raise DomainError("time strategy must list every time 0..T exactly once")
    return np.array([float(r["p"]) for r in rows])


def trace_to_dict(trace: TrainingTrace) -> dict:
    doc = {
        "rounds": [
            {"round": k, "root_value": v, "strategy": strategy_to_dict(s)}
            for k, (s, v) in enumerate(zip(trace.rounds, trace.root_values))
        ],
        "converged_round": trace.converged_round,
        "converged_to_sophisticated": trace.converged_to_sophisticated,
    }
    if trace.sophisticated is not None:
        doc["sophisticated"] = strategy_to_dict(trace.sophisticated)
    return doc


def trace_from_dict(doc: dict) -> TrainingTrace:
    soph = doc.get("sophisticated")
    return TrainingTrace(
        rounds=tuple(strategy_from_dict(r["strategy"]) for r in doc["rounds"]),
        root_values=tuple(float(r["root_value"]) for r in doc["rounds"]),
        converged_round=doc["converged_round"],
        converged_to_sophisticated=bool(doc["converged_to_sophisticated"]),
        sophisticated=strategy_from_dict(soph) if soph is not None else None,
    )


def dump(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load(path) -> dict:
    return json.loads(Path(path).read_text())


def write_strategy(s: Strategy, path) -> None:
    dump(strategy_to_dict(s), path)


def read_strategy(path) -> Strategy:
    return strategy_from_dict(load(path))
