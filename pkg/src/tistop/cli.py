"""Command-line front end: ``tistop CONFIG [--override key=value ...] [--out DIR]``.

Exit status is 0 on success, 2 for configuration errors and 3 when training
fails to converge (the partial trace is still written).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import presentbias as pb
from .config import ConfigError, ExperimentConfig, load_config
from .lattice import Lattice, Strategy, snap
from .render import render_strategy
from .serialize import dump, read_strategy, strategy_to_dict, trace_to_dict
from .solver import naive_strategy, precommitted_strategy, sophisticated_strategy
from .training import ConvergenceError, TrainingTrace, measure_trace, train_until_fixed

log = logging.getLogger("tistop")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _randomized_nodes(s: Strategy) -> list[dict]:
    probs = snap(s.probs)
    return [
        {"t": t, "x": x, "p": p}
        for (t, x), p in s.items()
        if 0.0 < probs[t, (t - x) // 2] < 1.0
    ]


def _strategy_block(pref, s: Strategy) -> dict:
    return {
        "root_value": pref.evaluate((0, 0), s),
        "root_action": s[(0, 0)],
        "randomized_nodes": _randomized_nodes(s),
        "strategy": strategy_to_dict(s),
    }


def _closed_form(pref, trace: TrainingTrace) -> dict | None:
    """Compare an engine trace with the present-bias closed forms."""
    engine = [s.time_vector(atol=1e-9) for s in trace.rounds]
    state_independent = all(v is not None for v in engine)
    if isinstance(pref, pb.CostPreference):
        p = pref.params
        formula = pb.cost_round_count(p)
        oracle = pb.cost_trace(p) if pb.cost_is_time_inconsistent(p) else [pb.cost_sophisticated(p)]
        extra = {"rho": pb.rho(p)} if pb.cost_is_time_inconsistent(p) else {}
    elif isinstance(pref, pb.RewardPreference):
        p = pref.params
        formula = pb.reward_round_count(p)
        consistent = p.theta**p.T >= p.beta or p.theta < p.beta
        oracle = [_reward_consistent_naive(p)] if consistent else pb.reward_trace(p)
        extra = {} if consistent else {"nu": pb.nu(p)}
    else:
        return None
    oracle_rounds = len(oracle) - 1
    same_trace = state_independent and len(engine) - 1 == len(oracle) and all(
        (snap(a) == b).all() for a, b in zip(engine, oracle)
    )
    return {
        **extra,
        "formula_round_count": formula,
        "closed_form_trace_round_count": oracle_rounds,
        "engine_round_count": trace.converged_round,
        "agrees_with_formula": trace.converged_round == formula,
        "agrees_with_closed_form_trace": bool(same_trace) and trace.converged_round == oracle_rounds,
        "closed_form_trace": [[float(v) for v in a] for a in oracle],
    }


def _reward_consistent_naive(p: pb.ImmediateRewardParams):
    import numpy as np

    if p.theta**p.T >= p.beta:
        return np.ones(p.T + 1)
    out = np.zeros(p.T + 1)
    out[-1] = 1.0
    return out


def _write_renders(cfg: ExperimentConfig, named: dict[str, Strategy]) -> None:
    if cfg.render == "none":
        return
    suffix = ".dot" if cfg.render == "dot" else ".txt"
    for name, s in named.items():
        (cfg.output_dir / f"{name}{suffix}").write_text(render_strategy(s, cfg.render))


def _initial(cfg: ExperimentConfig, pref, lat: Lattice) -> Strategy:
    if cfg.initial == "naive":
        return naive_strategy(pref, lat, cfg.solver)
    if cfg.initial == "half-half":
        return Strategy.constant(lat.horizon, 0.5)
    s = read_strategy(cfg.initial)
    if s.horizon != lat.horizon:
        raise ConfigError(f"initial strategy has horizon {s.horizon}, config has {lat.horizon}")
    return s


def run(cfg: ExperimentConfig) -> int:
    pref = cfg.build_preference()
    lat = Lattice(cfg.horizon)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    result: dict = {"config": cfg.raw, "mode": cfg.mode}
    renders: dict[str, Strategy] = {}
    status = EXIT_OK

    if cfg.mode in ("naive", "sophisticated"):
        fn = naive_strategy if cfg.mode == "naive" else sophisticated_strategy
        s = fn(pref, lat, cfg.solver)
        result[cfg.mode] = _strategy_block(pref, s)
        renders[cfg.mode] = s
    elif cfg.mode == "precommitted":
        plan = precommitted_strategy(pref, lat, cfg.solver)
        result["precommitted"] = {**_strategy_block(pref, plan.actions), "plan_value": plan.value}
        renders["precommitted"] = plan.actions
    else:
        try:
            if cfg.mode == "measure":
                trace = measure_trace(pref, lat, cfg.solver)
            else:
                initial = _initial(cfg, pref, lat)
                trace = train_until_fixed(pref, initial, cfg.solver, max_rounds=cfg.max_rounds)
        except ConvergenceError as exc:
            log.error("%s", exc)
            trace = exc.trace
            status = EXIT_DIVERGED
        if cfg.mode == "train" and not trace.converged:
            log.error("training did not reach a fixed point")
            status = EXIT_DIVERGED
        dump(trace_to_dict(trace), cfg.output_dir / "trace.json")
        result["training"] = {
            "converged_round": trace.converged_round,
            "converged_to_sophisticated": trace.converged_to_sophisticated,
            "root_values": list(trace.root_values),
            "rounds": [_strategy_block(pref, s) for s in trace.rounds],
        }
        if trace.sophisticated is not None:
            result["sophisticated"] = _strategy_block(pref, trace.sophisticated)
        if cfg.mode == "measure":
            result["inconsistency_measure"] = trace.converged_round
            if status == EXIT_OK:
                closed = _closed_form(pref, trace)
                if closed is not None:
                    result["closed_form"] = closed
        renders.update({f"round_{k:02d}": s for k, s in enumerate(trace.rounds)})

    dump(result, cfg.output_dir / "result.json")
    _write_renders(cfg, renders)
    return status


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tistop",
        description="Naive, sophisticated and pre-committed stopping strategies on a binomial lattice.",
    )
    parser.add_argument("config", help="TOML experiment file, or preset:NAME (cpt-a, cpt-b, present-cost, present-reward)")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="override a config key (repeatable)")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.override, args.out)
        log.info("running %s with T=%d into %s", cfg.mode, cfg.horizon, cfg.output_dir)
        status = run(cfg)
    except ConfigError as exc:
        print(f"tistop: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if status == EXIT_OK:
        print(Path(cfg.output_dir) / "result.json")
    return status


if __name__ == "__main__":
    sys.exit(main())
