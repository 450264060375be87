import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tistop.cpt import CptParams, CptPreference, cpt_value, cpt_values, evaluate, utility, weight
from tistop.lattice import DomainError, Lattice, Strategy, TerminalDistribution, terminal_distribution

from .oracles import cpt_value_table, weight_mp

EXP_A = CptParams.symmetric(0.9, 0.5, 1.5)


def test_utility_examples():
    assert utility(CptParams(alpha_plus=0.9), 1.0) == 1.0
    assert utility(CptParams(alpha_minus=0.9, lam=1.5), -1.0) == -1.5
    assert utility(CptParams(alpha_plus=0.5), 4.0) == 2.0


def test_utility_reference_point():
    p = CptParams(alpha_plus=0.5, alpha_minus=0.5, lam=2.0, reference=1.0)
    assert utility(p, 5.0) == 2.0
    assert utility(p, 0.0) == -2.0
    assert utility(p, 1.0) == 0.0


def test_weight_examples():
    p = CptParams(delta_plus=0.5, delta_minus=0.5)
    assert weight(p, 0.0) == 0.0
    assert weight(p, 1.0) == 1.0
    assert weight(CptParams(delta_plus=0.83), 1.0) == 1.0
    # mpmath reference: 0.5^0.5 / (2 * 0.5^0.5)^2 = 1 / (2 sqrt 2)
    assert weight(p, 0.5) == pytest.approx(0.35355339059327373, abs=1e-15)
    assert weight(p, 0.5) == pytest.approx(float(weight_mp(0.5, 0.5)), abs=1e-15)


@pytest.mark.parametrize("q", [-0.1, 1.5, float("nan")])
def test_weight_domain(q):
    with pytest.raises(DomainError):
        weight(EXP_A, q)


def test_weight_side_argument():
    p = CptParams(delta_plus=0.5, delta_minus=0.9)
    assert weight(p, 0.3, "loss") == pytest.approx(float(weight_mp(0.3, 0.9)), abs=1e-14)
    with pytest.raises(DomainError):
        weight(p, 0.3, "both")


def test_params_validation():
    with pytest.raises(DomainError):
        CptParams(alpha_plus=0.0)
    with pytest.raises(DomainError):
        CptParams(alpha_minus=1.2)
    with pytest.raises(DomainError):
        CptParams(lam=0.5)
    with pytest.warns(UserWarning):
        CptParams(delta_plus=0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        CptParams(delta_plus=1.0, delta_minus=0.3)


@pytest.mark.parametrize("delta", [0.28, 0.4, 0.5, 0.65, 0.9, 1.0])
def test_weight_strictly_increasing(delta):
    q = np.linspace(0.0, 1.0, 10_000)
    w = weight(CptParams(delta_plus=delta), q)
    assert np.all(np.diff(w) > 0)


def test_cpt_value_examples():
    assert cpt_value(EXP_A, TerminalDistribution.from_mapping(5, {0: 1.0})) == 0.0
    for delta in (0.3, 0.5, 1.0):
        p = CptParams.symmetric(0.9, delta, 1.5)
        v = cpt_value(p, TerminalDistribution.from_mapping(5, {3: 1.0}))
        assert v == pytest.approx(3**0.9, abs=1e-14)


def test_cpt_value_two_point():
    d = TerminalDistribution.from_mapping(2, {2: 0.5, -2: 0.5})
    closed = 2**0.9 * weight(EXP_A, 0.5) - 1.5 * 2**0.9 * weight(EXP_A, 0.5, "loss")
    table = cpt_value_table(d.as_dict(), 0.9, 0.9, 0.5, 0.5, 1.5)
    assert cpt_value(EXP_A, d) == pytest.approx(closed, abs=1e-14)
    assert cpt_value(EXP_A, d) == pytest.approx(table, abs=1e-12)


def test_cpt_value_rejects_unnormalized():
    with pytest.raises(DomainError):
        cpt_value(EXP_A, TerminalDistribution.from_mapping(2, {2: 0.5}))


def test_evaluate_examples():
    lat = Lattice(5)
    assert evaluate(EXP_A, lat, (0, 0), Strategy.constant(5, 1.0)) == 0.0
    assert evaluate(EXP_A, lat, (1, 1), Strategy.constant(5, 1.0)) == 1.0


def test_evaluate_never_stop_two_ways():
    lat = Lattice(5)
    s = Strategy.constant(5, 0.0)
    d = terminal_distribution(lat, (0, 0), s)
    table = cpt_value_table(d.as_dict(), 0.9, 0.9, 0.5, 0.5, 1.5)
    assert evaluate(EXP_A, lat, (0, 0), s) == pytest.approx(table, abs=1e-12)


def _random_dist(rng, T):
    m = rng.random(2 * T + 1) * (rng.random(2 * T + 1) < 0.7)
    if m.sum() == 0:
        m[T] = 1.0
    return m / m.sum()


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 6),
    st.integers(0, 2**32 - 1),
    st.floats(0.3, 1.0),
    st.floats(0.3, 1.0),
    st.floats(0.3, 1.0),
    st.floats(0.3, 1.0),
    st.floats(1.0, 3.0),
)
def test_rank_dependent_sum_matches_decision_table(T, seed, ap, am, dp, dm, lam):
    rng = np.random.default_rng(seed)
    mass = _random_dist(rng, T)
    d = TerminalDistribution(T, mass)
    p = CptParams(ap, am, dp, dm, lam)
    assert cpt_value(p, d) == pytest.approx(cpt_value_table(d.as_dict(), ap, am, dp, dm, lam), abs=1e-10)


def test_expected_utility_degeneration():
    rng = np.random.default_rng(7)
    p = CptParams.symmetric(1.0, 1.0, 1.0)
    for T in (1, 3, 6, 10):
        masses = np.array([_random_dist(rng, T) for _ in range(200)])
        means = masses @ np.arange(-T, T + 1)
        np.testing.assert_allclose(cpt_values(p, masses), means, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_zero_mass_states_do_not_matter(T, pad, seed):
    rng = np.random.default_rng(seed)
    mass = _random_dist(rng, T)
    wide = np.concatenate([np.zeros(pad), mass, np.zeros(pad)])
    assert cpt_value(EXP_A, TerminalDistribution(T + pad, wide)) == pytest.approx(
        cpt_value(EXP_A, TerminalDistribution(T, mass)), abs=1e-13
    )


def test_mixture_value_is_continuous_in_stop_probability():
    pref = CptPreference(EXP_A, 5)
    base = Strategy.constant(5, 0.0)
    ps = np.linspace(0.0, 1.0, 20_001)
    probs = np.broadcast_to(base.probs, (ps.size, 6, 6)).copy()
    probs[:, 2, 1] = ps
    v = pref.evaluate_batch((2, 0), probs)
    # increments shrink with the step; no jumps anywhere on [0, 1]
    assert np.max(np.abs(np.diff(v))) < 0.02
    coarse = pref.evaluate_batch((2, 0), probs[::10])
    assert np.max(np.abs(np.diff(coarse))) < 0.1


def test_reference_point_split():
    p = CptParams(1.0, 1.0, 1.0, 1.0, 1.0, reference=1.0)
    d = TerminalDistribution.from_mapping(3, {3: 0.25, 1: 0.25, -1: 0.5})
    # linear utility around B=1 without distortion: E[X] - B
    assert cpt_value(p, d) == pytest.approx(d.mean() - 1.0, abs=1e-14)
