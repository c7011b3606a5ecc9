import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from camg.core import ConfigError, StrategyProfile, make_config
from camg.equilibrium import n3_payoff_w2
from camg.markov import build_transition_matrix
from camg.payoff import (
    NumericError,
    average_payoff,
    discounted_payoffs,
    inefficiency,
    payoff_report,
    payoff_series,
    payoffs_batch,
    w_rand,
)

from conftest import interior_prob, profiles


@given(profiles(hi=9), st.floats(0.0, 0.95))
def test_solve_matches_truncated_series(p, lam):
    T = build_transition_matrix(p)
    assert np.abs(discounted_payoffs(T, lam) - payoff_series(T, lam)).max() < 1e-10


@given(profiles())
def test_lambda_zero_is_next_day_win_probability(p):
    T = build_transition_matrix(p)
    m = (p.n_agents - 1) // 2
    assert np.allclose(discounted_payoffs(T, 0.0), T[:m].sum(axis=0), atol=1e-14)


@given(interior_prob, st.floats(0.0, 0.99))
def test_n3_closed_form(p2, lam):
    w = discounted_payoffs(build_transition_matrix(StrategyProfile((0.0, p2, 0.5))), lam)
    assert w[1] == pytest.approx(n3_payoff_w2(p2, lam), abs=1e-12)


@given(interior_prob)
def test_n3_average_payoff(p2):
    assert average_payoff(StrategyProfile((0.0, p2, 0.5))) == pytest.approx(1 / (3 + 4 * p2**2), abs=1e-12)


def test_batch_agrees_with_single():
    rng = np.random.default_rng(3)
    P = rng.uniform(size=(6, 7))
    W = payoffs_batch(P, 0.6)
    for k in range(6):
        assert np.allclose(W[k], discounted_payoffs(build_transition_matrix(StrategyProfile(tuple(P[k]))), 0.6))


@pytest.mark.parametrize("n,expected", [(3, 0.25), (5, 0.3125), (7, 0.5 - 20 / 128)])
def test_w_rand_values(n, expected):
    assert w_rand(n) == pytest.approx(expected, abs=1e-15)


def test_w_rand_against_binomial_pmf_large_n():
    from scipy.stats import binom

    n = 1001
    m = (n - 1) // 2
    assert w_rand(n) == pytest.approx(float(binom.cdf(m - 1, n - 1, 0.5)), rel=1e-12)
    assert w_rand(n) == pytest.approx(0.5 - 1 / math.sqrt(2 * math.pi * n), abs=1e-4)


@pytest.mark.parametrize("n", [3, 5, 7, 9])
def test_uniform_profile_payoff_is_w_rand(n):
    p = StrategyProfile((0.5,) * n)
    w = discounted_payoffs(build_transition_matrix(p), 0.8)
    assert np.allclose(w, w_rand(n), atol=1e-13)
    assert average_payoff(p) == pytest.approx(w_rand(n))
    assert inefficiency(average_payoff(p), n) == pytest.approx(1.0)


def test_inefficiency_zero_at_w_max():
    assert inefficiency(2 / 5, 5) == 0.0


def test_report_fields():
    cfg = make_config(5, 0.3)
    rep = payoff_report(StrategyProfile((0.5,) * 5), cfg)
    d = rep.to_dict()
    assert d["per_state"] == pytest.approx([0.3125] * 5)
    assert d["w_max"] == pytest.approx(0.4)
    assert d["irreducible"]


def test_rejects_bad_discount():
    T = build_transition_matrix(StrategyProfile((0.5,) * 3))
    with pytest.raises(ConfigError):
        discounted_payoffs(T, 1.0)


def test_ill_conditioned_solve_raises():
    T = build_transition_matrix(StrategyProfile((0.5,) * 3))
    with pytest.raises(NumericError):
        discounted_payoffs(T, 1.0 - 1e-15)
