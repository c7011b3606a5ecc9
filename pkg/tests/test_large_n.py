import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from camg.core import ConfigError
from camg.large_n import (
    C_CONST,
    D_CONST,
    ScaledParams,
    a_star_table,
    asymptotic_payoff_e2,
    b_max,
    eigen_triple,
    exact_reduced_payoffs,
    lambda_c1_estimate,
    optimal_bracket,
    payoff_bracket,
    random_baseline,
    reduced_matrix,
    solve_a_star,
    stationarity_rhs,
    time_scales,
)

a_vals = st.floats(0.01, 3.0)
m_vals = st.integers(10**4, 10**9)


def test_constants_from_pi():
    assert C_CONST == pytest.approx(1 / math.sqrt(math.pi))
    assert D_CONST == pytest.approx(C_CONST / 2)


def test_params_validate():
    with pytest.raises(ConfigError):
        ScaledParams(-1.0, 0.0, 10)
    with pytest.raises(ConfigError):
        ScaledParams(1.0, -0.1, 10)
    with pytest.raises(ConfigError):
        ScaledParams(1.0, 0.1, 0)


def test_reduced_matrix_at_a_zero():
    p = ScaledParams(0.0, 0.0, 100)
    T = reduced_matrix(p)
    h = 100**-0.5
    assert np.allclose(T[:, 2], [C_CONST * h, C_CONST * h, 1 - 2 * C_CONST * h])
    assert np.allclose(T[:, :2], [[1, 0], [0, 1], [0, 0]])


def test_reduced_matrix_rejects_small_m():
    with pytest.raises(ConfigError):
        reduced_matrix(ScaledParams(3.0, 0.0, 1))


@given(a_vals, m_vals)
def test_columns_sum_to_one(a, m):
    assert np.allclose(reduced_matrix(ScaledParams(a, 0.0, m)).sum(axis=0), 1.0, atol=1e-14)


@given(a_vals, m_vals)
def test_eigen_triple_against_numeric(a, m):
    p = ScaledParams(a, 0.0, m)
    T = reduced_matrix(p)
    triple = eigen_triple(p)
    numeric = np.sort(np.linalg.eigvals(T).real)
    assert np.allclose(numeric, np.sort([e.value for e in triple]), atol=1e-10)
    for e in triple:
        assert np.allclose(T @ e.right, e.value * e.right, atol=1e-13)
        assert np.allclose(e.left @ T, e.value * e.left, atol=1e-13)


@given(a_vals, m_vals)
def test_biorthonormal_and_reconstruction(a, m):
    p = ScaledParams(a, 0.0, m)
    triple = eigen_triple(p)
    G = np.array([[li.left @ rj.right for rj in triple] for li in triple])
    assert np.abs(G - np.eye(3)).max() < 1e-12
    recon = sum(e.value * np.outer(e.right, e.left) for e in triple)
    assert np.abs(recon - reduced_matrix(p)).max() < 1e-12
    assert triple[0].right.sum() == pytest.approx(1.0)


def test_mu2_at_edge_of_branch():
    m = 10**6
    a = 2 * math.sqrt(C_CONST)
    mu2 = eigen_triple(ScaledParams(a, 0.0, m))[1].value
    assert mu2 == pytest.approx(1 - 4 * C_CONST * m**-0.5, abs=1e-15)


def test_payoff_rejects_a_zero():
    with pytest.raises(ValueError, match="pole"):
        asymptotic_payoff_e2(0.0, 0.5, 100)


def test_payoff_large_a_limit():
    m = 10**4
    w = asymptotic_payoff_e2(1e8, 0.0, m)
    assert w.value == pytest.approx(random_baseline(m), abs=1e-9)


@given(st.floats(0.1, 2.5), st.floats(0.0, 1.5), m_vals)
def test_payoff_decomposition(a, b, m):
    w = asymptotic_payoff_e2(a, b, m)
    # W_e2 = U_1 <L_1|e2> + U_3 <L_3|e2>, and <L_3|e2> = -1/2
    assert w.value == pytest.approx(w.u1 - 0.5 * w.u3, abs=1e-14)


@pytest.mark.parametrize("a,b", [(0.7, 0.3), (1.2, 0.6)])
def test_asymptotic_payoff_matches_exact_reduced_model(a, b):
    # the gap should shrink faster than M^-1/2 as M grows
    gaps = []
    for m in (10**6, 10**10):
        p = ScaledParams(a, b, m)
        gaps.append(abs(exact_reduced_payoffs(p)[1] - asymptotic_payoff_e2(a, b, m).value) * m**0.5)
    assert gaps[1] < gaps[0] / 5
    assert gaps[1] < 1e-2


def test_b_max_value():
    assert b_max() == pytest.approx(2 * math.pi**-0.75, abs=1e-15)


def test_a_star_endpoints():
    assert solve_a_star(0.0).a_star == 0.0
    r = solve_a_star(b_max())
    assert r.a_star == pytest.approx(2 * math.pi**-0.25, abs=1e-8)
    assert r.beats_random


def test_a_star_beyond_branch():
    r = solve_a_star(1.2 * b_max())
    assert not r.found
    assert not r.beats_random
    for root in r.other_roots:
        assert stationarity_rhs(root) == pytest.approx(1.2 * b_max(), abs=1e-10)
        assert root**2 > 4 * C_CONST


def test_a_star_increasing_and_stationary():
    bs = np.linspace(0.01, b_max(), 60)
    a = [solve_a_star(b).a_star for b in bs]
    assert np.all(np.diff(a) > 0)
    for b, x in zip(bs, a):
        h = 1e-5
        deriv = (payoff_bracket(x + h, b) - payoff_bracket(x - h, b)) / (2 * h)
        assert abs(deriv) < 1e-8
        assert payoff_bracket(x, b) == pytest.approx(optimal_bracket(x), abs=1e-12)


def test_lambda_c1_estimate():
    est, caveat = lambda_c1_estimate(3)
    assert est == pytest.approx(1 - 2 * math.pi**-0.75)
    assert caveat
    est, caveat = lambda_c1_estimate(2 * 10**8 + 1)
    assert est > 0.999 and not caveat
    with pytest.raises(ConfigError):
        lambda_c1_estimate(4)


def test_time_scales_ordering():
    ts = time_scales(ScaledParams(1.0, 0.5, 10**8))
    assert ts["hop_e1_e2"] < ts["escape_e3"] < ts["horizon"]


def test_table_flags():
    rows = a_star_table(np.array([0.0, 0.5 * b_max(), b_max(), 1.5 * b_max()]), 1000)
    assert [r["beats_random"] for r in rows] == [True, True, True, False]
    assert math.isnan(rows[-1]["a_star"])
