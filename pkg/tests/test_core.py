import pytest
from hypothesis import given

from camg.core import (
    ConfigError,
    StrategyProfile,
    canonicalize,
    flip_pair,
    make_config,
    uniform_profile,
)
from camg.markov import build_transition_matrix
from camg.payoff import discounted_payoffs

from conftest import profiles


@pytest.mark.parametrize("n", [3, 5, 7, 101])
def test_make_config_accepts_odd(n):
    cfg = make_config(n, 0.5)
    assert cfg.m_half == (n - 1) // 2
    assert cfg.w_max == pytest.approx(cfg.m_half / n)


@pytest.mark.parametrize(
    "n,lam,match",
    [(4, 0.5, "odd"), (1, 0.5, ">= 3"), (3, 1.0, "discount"), (3, -0.1, "discount"), (3.5, 0.2, "integer")],
)
def test_make_config_rejects(n, lam, match):
    with pytest.raises(ConfigError, match=match):
        make_config(n, lam)


def test_make_config_rejects_bad_tol_and_grid():
    with pytest.raises(ConfigError):
        make_config(3, 0.1, tol=0.0)
    with pytest.raises(ConfigError):
        make_config(3, 0.1, grid=1)


@pytest.mark.parametrize("values", [(0.1, 0.2), (0.1, 0.2, 0.3, 0.4), (0.0, 1.2, 0.5), (0.0, float("nan"), 0.5)])
def test_profile_validation(values):
    with pytest.raises(ConfigError):
        StrategyProfile(values)


def test_profile_length_must_match_config():
    with pytest.raises(ConfigError, match="N = 5"):
        StrategyProfile((0.0, 0.5, 0.5)).check(make_config(5, 0.2))


def test_uniform_profile():
    assert uniform_profile(make_config(5, 0.0)).probs == (0.5,) * 5


def test_flip_pair_complements_both_entries():
    p = StrategyProfile((0.1, 0.2, 0.3, 0.4, 0.5))
    q = flip_pair(p, 2)
    assert q.probs == pytest.approx((0.1, 0.8, 0.7, 0.4, 0.5))
    with pytest.raises(ConfigError):
        flip_pair(p, 5)


@given(profiles())
def test_flip_pair_is_an_involution(p):
    for j in range(1, p.n_agents):
        assert flip_pair(flip_pair(p, j), j).probs == pytest.approx(p.probs, abs=1e-15)


@given(profiles())
def test_flip_pair_leaves_dynamics_unchanged(p):
    T = build_transition_matrix(p)
    for j in range(1, p.n_agents):
        T2 = build_transition_matrix(flip_pair(p, j))
        assert abs(T2 - T).max() < 1e-12
    w = discounted_payoffs(T, 0.7)
    w2 = discounted_payoffs(build_transition_matrix(flip_pair(p, 1)), 0.7)
    assert abs(w2 - w).max() < 1e-12


@given(profiles())
def test_canonicalize_picks_win_stay_representative(p):
    c = canonicalize(p)
    n = p.n_agents
    for j in range(1, (n - 1) // 2 + 1):
        assert c.p(j) <= c.p(n - j) + 1e-15
    assert abs(build_transition_matrix(c) - build_transition_matrix(p)).max() < 1e-12
    assert canonicalize(c) == c
