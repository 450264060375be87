"""The nine acceptance criteria, each reporting one PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -s`` (or ``python tests/test_acceptance.py``)
to see the report; the lines are also written to the terminal when output is captured.
"""
import contextlib
import itertools
import time

import numpy as np
import pytest

from tistop import presentbias as pb
from tistop.cpt import CptParams, CptPreference, cpt_value
from tistop.lattice import Lattice, Strategy, TerminalDistribution, terminal_distribution, terminal_masses
from tistop.solver import SolverConfig, naive_strategy, optimize_subtree, sophisticated_strategy
from tistop.training import ConvergenceError, measure_trace, strategies_equal, train_until_fixed

from .oracles import brute_force_pure

pytestmark = pytest.mark.acceptance

CFG = SolverConfig()
PURE = SolverConfig(mode="pure")
# present-bias optima are pure threshold plans; fewer random restarts keep the grid affordable
FAST = SolverConfig(multistart_count=8)
EXP_A = CptParams.symmetric(0.9, 0.5, 1.5)
EXP_B = CptParams.symmetric(0.5, 0.9, 1.5)


@contextlib.contextmanager
def criterion(capsys, number, title):
    """Print one PASS/FAIL line for the enclosed checks; ``detail`` is appended to it."""
    info = {"detail": ""}
    start = time.perf_counter()
    try:
        yield info
    except BaseException as exc:
        status, reason = "FAIL", f" ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        raise
    else:
        status, reason = "PASS", ""
    finally:
        elapsed = time.perf_counter() - start
        line = f"criterion {number} {status}: {title} [{elapsed:.1f}s] {info['detail']}{reason}".rstrip()
        with capsys.disabled():
            print("\n" + line)


def test_criterion_1_experiment_a(capsys):
    with criterion(capsys, 1, "five-period CPT experiment A") as info:
        start = time.perf_counter()
        trace = measure_trace(CptPreference(EXP_A, 5), Lattice(5), CFG)
        elapsed = time.perf_counter() - start
        naive, soph = trace.rounds[0], trace.sophisticated
        info["detail"] = (
            f"measure={trace.converged_round} naive_root={naive[(0, 0)]} trained_root={trace.rounds[-1][(0, 0)]} "
            f"p(2,0)={naive[(2, 0)]:.5f}"
        )
        assert trace.converged_round == 2
        assert naive[(0, 0)] == 0.0
        assert soph[(0, 0)] == 1.0 and trace.rounds[-1][(0, 0)] == 1.0
        assert abs(naive[(2, 0)] - 0.23454) <= 5e-3
        assert elapsed < 60.0


def test_criterion_2_experiment_b(capsys):
    with criterion(capsys, 2, "five-period CPT experiment B") as info:
        trace = measure_trace(CptPreference(EXP_B, 5), Lattice(5), CFG)
        root = trace.rounds[-1][(0, 0)]
        info["detail"] = f"measure={trace.converged_round} naive_root={trace.rounds[0][(0, 0)]} trained_root={root:.5f}"
        assert trace.converged_round == 1
        assert trace.rounds[0][(0, 0)] == 1.0
        assert 0.5 < root < 1.0


def test_criterion_3_pure_variant(capsys):
    with criterion(capsys, 3, "pure-strategy variant") as info:
        counts = {}
        for name, params in (("A", EXP_A), ("B", EXP_B)):
            counts[name] = measure_trace(CptPreference(params, 5), Lattice(5), PURE).converged_round
        info["detail"] = f"A={counts['A']} B={counts['B']}"
        assert counts == {"A": 2, "B": 0}


def test_criterion_4_half_half_start(capsys):
    with criterion(capsys, 4, "half-half initial strategy") as info:
        counts = {}
        for name, params in (("A", EXP_A), ("B", EXP_B)):
            trace = train_until_fixed(CptPreference(params, 5), Strategy.constant(5, 0.5), CFG)
            assert trace.converged_to_sophisticated
            counts[name] = trace.converged_round
        info["detail"] = f"A={counts['A']} B={counts['B']}"
        assert counts == {"A": 2, "B": 2}


PROP1_GRID = list(itertools.product([0.5, 0.7, 0.9], [0.4, 0.65, 0.9], [1.0, 1.5, 2.25]))


def test_criterion_5_convergence_bound(capsys):
    with criterion(capsys, 5, "convergence within T-1 rounds on the 27-point grid, T=2..6") as info:
        start = time.perf_counter()
        failures, worst = [], 0
        for (alpha, delta, lam), T in itertools.product(PROP1_GRID, range(2, 7)):
            pref = CptPreference(CptParams.symmetric(alpha, delta, lam), T)
            lat = Lattice(T)
            try:
                trace = measure_trace(pref, lat, CFG)
            except ConvergenceError as exc:
                failures.append((alpha, delta, lam, T, str(exc)))
                continue
            worst = max(worst, trace.converged_round)
            if not strategies_equal(trace.rounds[-1], sophisticated_strategy(pref, lat, CFG), tol=1e-6):
                failures.append((alpha, delta, lam, T, "limit differs from backward induction"))
        elapsed = time.perf_counter() - start
        info["detail"] = f"cases={len(PROP1_GRID) * 5} failures={len(failures)} max_rounds={worst}"
        assert not failures, failures[:3]
        assert elapsed < 15 * 60


COST_GRID = [
    (beta, ratio, T)
    for beta in (0.3, 0.5, 0.7, 0.9)
    for ratio in (0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 30.0)
    for T in range(2, 11)
]
REWARD_GRID = [
    (beta, theta, T)
    for theta in (0.7, 0.9, 0.95)
    for beta in (0.3, 0.6, 0.8, 0.81, 0.9, 0.97)
    for T in range(2, 11)
]


def _engine_vectors(trace):
    vectors = [s.time_vector(atol=1e-9) for s in trace.rounds]
    assert all(v is not None for v in vectors), "engine strategies are not state-independent"
    # the last round is the confirming sweep
    return [v.tolist() for v in vectors[:-1]]


def _cost_case(beta, ratio, T):
    p = pb.ImmediateCostParams(beta=beta, v=100.0, c=ratio, k=1.0, T=T)
    if pb.cost_is_time_inconsistent(p):
        expected = [a.tolist() for a in pb.cost_trace(p)]
        adjust = 1 if pb.rho(p) <= T and T % pb.rho(p) == 0 else 0
    else:
        expected, adjust = [[1.0] * (T + 1)], 0
    return pb.CostPreference(p), expected, pb.cost_round_count(p), adjust


def _reward_case(beta, theta, T):
    p = pb.ImmediateRewardParams(beta=beta, theta=theta, v=1.0, T=T)
    if theta >= beta > theta**T:
        expected, adjust = [a.tolist() for a in pb.reward_trace(p)], 1
    elif theta**T >= beta:
        expected, adjust = [[1.0] * (T + 1)], 0
    else:
        expected, adjust = [[0.0] * T + [1.0]], 0
    return pb.RewardPreference(p), expected, pb.reward_round_count(p), adjust


def test_criterion_6_present_bias_closed_forms(capsys):
    with criterion(capsys, 6, "present-bias engine vs closed-form traces and counts") as info:
        trace_mismatch, count_mismatch, formula_off, undocumented = [], [], 0, []
        cases = [("cost", _cost_case(*c), c) for c in COST_GRID]
        cases += [("reward", _reward_case(*c), c) for c in REWARD_GRID]
        for kind, (pref, expected, formula, adjust), key in cases:
            trace = measure_trace(pref, Lattice(pref.horizon), FAST)
            engine = _engine_vectors(trace)
            if engine != expected:
                trace_mismatch.append((kind, key))
            if trace.converged_round != len(expected) - 1:
                count_mismatch.append((kind, key))
            if trace.converged_round != formula:
                formula_off += 1
                # only the characterized off-by-one is acceptable
                if trace.converged_round != formula - adjust:
                    undocumented.append((kind, key, trace.converged_round, formula))
        info["detail"] = (
            f"cases={len(cases)} trace_mismatch={len(trace_mismatch)} count_vs_trace_mismatch={len(count_mismatch)} "
            f"count_vs_formula_off_by_one={formula_off} undocumented={len(undocumented)}"
        )
        assert not trace_mismatch, trace_mismatch[:5]
        assert not count_mismatch, count_mismatch[:5]
        assert not undocumented, undocumented[:5]


def test_criterion_7_expected_utility_degeneration(capsys):
    with criterion(capsys, 7, "expected-utility degeneration") as info:
        eu = CptParams(1.0, 1.0, 1.0, 1.0, 1.0, reference=0.0)
        rng = np.random.default_rng(20240607)
        worst = 0.0
        for _ in range(1000):
            T = int(rng.integers(1, 11))
            t = int(rng.integers(0, T + 1))
            x = int(rng.choice(np.arange(-t, t + 1, 2)))
            s = Strategy(T, rng.random((T + 1, T + 1)))
            d = terminal_distribution(Lattice(T), (t, x), s)
            worst = max(worst, abs(cpt_value(eu, d) - d.mean()))
        agents_stop = True
        for T in (1, 3, 5):
            pref, lat = CptPreference(eu, T), Lattice(T)
            agents_stop &= bool(np.all(naive_strategy(pref, lat, CFG).probs == 1.0))
            agents_stop &= bool(np.all(sophisticated_strategy(pref, lat, CFG).probs == 1.0))
        info["detail"] = f"max|V-mean|={worst:.2e} naive=sophisticated=all-stop: {agents_stop}"
        assert worst <= 1e-10
        assert agents_stop


def test_criterion_8_pure_mode_matches_enumeration(capsys):
    with criterion(capsys, 8, "pure mode vs exhaustive enumeration, T<=5") as info:
        checked, mismatches = 0, []
        param_sets = [EXP_A, EXP_B, CptParams(0.7, 0.8, 0.4, 0.65, 2.25)]
        for params, T in itertools.product(param_sets, range(1, 6)):
            lat = Lattice(T)
            pref = CptPreference(params, T)

            def value(states, T=T, params=params):
                m = np.zeros(2 * T + 1)
                for n, q in states.items():
                    m[n + T] += q
                return cpt_value(params, TerminalDistribution(T, m))

            for origin in lat.nodes():
                if origin[0] == T:
                    continue
                free = lat.free_nodes(origin)
                best, maximizers = brute_force_pure(T, origin, value, free)
                plan = optimize_subtree(pref, origin, PURE)
                checked += 1
                same_value = abs(plan.value - best) <= 1e-12
                is_maximizer = any(all(plan.actions[n] == m[n] for n in free) for m in maximizers)
                if not (same_value and is_maximizer):
                    mismatches.append((params, T, origin, plan.value, best))
        info["detail"] = f"subproblems={checked} mismatches={len(mismatches)}"
        assert not mismatches, mismatches[:3]


def test_criterion_9_normalization(capsys):
    with criterion(capsys, 9, "terminal distributions normalized on 10^4 random strategies") as info:
        rng = np.random.default_rng(99)
        worst, negative = 0.0, 0
        for T in range(1, 11):
            n = 1000
            probs = rng.random((n, T + 1, T + 1))
            probs[rng.random(probs.shape) < 0.15] = 0.0
            probs[rng.random(probs.shape) < 0.15] = 1.0
            for origin in [(0, 0)]:
                m = terminal_masses(T, origin, probs)
                worst = max(worst, float(np.max(np.abs(m.sum(axis=1) - 1.0))))
                negative += int(np.sum(m < 0.0))
            # the single-strategy entry point too, from random origins
            for b in range(0, n, 50):
                t = int(rng.integers(0, T + 1))
                x = int(rng.choice(np.arange(-t, t + 1, 2)))
                d = terminal_distribution(Lattice(T), (t, x), Strategy(T, probs[b]))
                worst = max(worst, abs(float(d.mass.sum()) - 1.0))
        info["detail"] = f"strategies=10000 max|sum-1|={worst:.2e} negative_masses={negative}"
        assert worst <= 1e-12
        assert negative == 0


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
