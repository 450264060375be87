"""Experiment configuration (TOML) and the built-in presets.

Example::

    horizon = 5

    [preference]
    kind = "cpt"          # cpt | present-cost | present-reward
    alpha = 0.9           # shorthand for alpha_plus = alpha_minus
    delta = 0.5
    lam = 1.5

    [solver]
    grid_resolution = 2001
    rng_seed = 12345

    [run]
    mode = "measure"      # naive | sophisticated | precommitted | train | measure
    initial = "naive"     # naive | half-half | <path to strategy document>
    pure = false

    [output]
    directory = "results"
    render = "ascii"      # dot | ascii | none
"""
from __future__ import annotations

import copy
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cpt import CptParams, CptPreference
from .lattice import DomainError
from .presentbias import CostPreference, ImmediateCostParams, ImmediateRewardParams, RewardPreference
from .solver import PURE, RANDOMIZED, SolverConfig

KINDS = ("cpt", "present-cost", "present-reward")
MODES = ("naive", "sophisticated", "precommitted", "train", "measure")
RENDERS = ("dot", "ascii", "none")

DEFAULTS: dict[str, Any] = {
    "horizon": 5,
    "preference": {"kind": "cpt"},
    "solver": {},
    "run": {"mode": "measure", "initial": "naive", "pure": False, "max_rounds": None},
    "output": {"directory": "results", "render": "ascii"},
}

PRESETS: dict[str, dict[str, Any]] = {
    "cpt-a": {"horizon": 5, "preference": {"kind": "cpt", "alpha": 0.9, "delta": 0.5, "lam": 1.5}},
    "cpt-b": {"horizon": 5, "preference": {"kind": "cpt", "alpha": 0.5, "delta": 0.9, "lam": 1.5}},
    "present-cost": {"horizon": 5, "preference": {"kind": "present-cost", "beta": 0.5, "v": 10.0, "c": 3.0, "k": 1.0}},
    "present-reward": {
        "horizon": 5,
        "preference": {"kind": "present-reward", "beta": 0.8, "theta": 0.9, "v": 1.0},
    },
}


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    horizon: int
    preference: dict
    solver: SolverConfig
    mode: str
    initial: str
    pure: bool
    max_rounds: int | None
    output_dir: Path
    render: str
    raw: dict

    def build_preference(self):
        return build_preference(self.preference, self.horizon)


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    """Parse ``a.b.c=value``; the value is read as a TOML literal, falling back to a bare string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.split("."), value


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    doc = copy.deepcopy(doc)
    for text in overrides:
        path, value = parse_override(text)
        node = doc
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r} descends into a non-table value")
        node[path[-1]] = value
    return doc


def build_preference(block: dict, horizon: int):
    kind = block.get("kind")
    params = {k: v for k, v in block.items() if k != "kind"}
    try:
        if kind == "cpt":
            for short, pair in (("alpha", ("alpha_plus", "alpha_minus")), ("delta", ("delta_plus", "delta_minus"))):
                if short in params:
                    val = params.pop(short)
                    for name in pair:
                        params.setdefault(name, val)
            return CptPreference(CptParams(**params), horizon)
        if kind == "present-cost":
            return CostPreference(ImmediateCostParams(T=horizon, **params))
        if kind == "present-reward":
            return RewardPreference(ImmediateRewardParams(T=horizon, **params))
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"invalid {kind} preference parameters: {exc}") from exc
    raise ConfigError(f"preference.kind must be one of {KINDS}, got {kind!r}")


def resolve(doc: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a raw configuration document (defaults already merged in)."""
    doc = _merge(DEFAULTS, doc)
    try:
        horizon = int(doc["horizon"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"horizon must be an integer: {exc}") from exc
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    run, out = doc["run"], doc["output"]
    if run["mode"] not in MODES:
        raise ConfigError(f"run.mode must be one of {MODES}, got {run['mode']!r}")
    if out["render"] not in RENDERS:
        raise ConfigError(f"output.render must be one of {RENDERS}, got {out['render']!r}")
    pure = bool(run["pure"])
    allowed = {f.name for f in fields(SolverConfig)} - {"mode"}
    unknown = set(doc["solver"]) - allowed
    if unknown:
        raise ConfigError(f"unknown solver settings: {sorted(unknown)}")
    try:
        solver = SolverConfig(**doc["solver"], mode=PURE if pure else RANDOMIZED)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"invalid solver settings: {exc}") from exc
    initial = str(run["initial"])
    if initial not in ("naive", "half-half"):
        path = Path(initial)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"initial strategy file {str(path)!r} does not exist")
        initial = str(path)
    build_preference(doc["preference"], horizon)
    doc["solver"] = {k: v for k, v in asdict(solver).items() if k != "mode"}
    return ExperimentConfig(
        horizon=horizon,
        preference=dict(doc["preference"]),
        solver=solver,
        mode=run["mode"],
        initial=initial,
        pure=pure,
        max_rounds=run.get("max_rounds"),
        output_dir=Path(out["directory"]),
        render=out["render"],
        raw=doc,
    )


def load_config(path, overrides: list[str] = (), out_dir: str | None = None) -> ExperimentConfig:
    """Read a TOML file, or a preset name such as ``preset:cpt-a``."""
    text = str(path)
    base_dir = None
    if text.startswith("preset:"):
        name = text.split(":", 1)[1]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        doc = copy.deepcopy(PRESETS[name])
    else:
        p = Path(text)
        try:
            doc = tomllib.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {text!r}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse config {text!r}: {exc}") from exc
        base_dir = p.parent
    doc = apply_overrides(doc, list(overrides))
    if out_dir is not None:
        doc = _merge(doc, {"output": {"directory": out_dir}})
    return resolve(doc, base_dir)
