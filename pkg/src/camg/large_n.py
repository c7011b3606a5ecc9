"""Asymptotic analysis of the first transition at large N.

The chain is coarse-grained onto three states: ``e1`` (the agent sits in a
restaurant of M people), ``e2`` (a restaurant of M+1) and ``e3`` (anything
else). Agents in ``C_M`` stay put while those in ``C_{M+1}`` jump with a small
probability, parametrised through ``a = T_21 * M^(1/4)``. The horizon enters
through ``b = (1 - lambda) * M^(3/4)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from camg.core import ConfigError

# Gaussian weight of an (M, M+1) split under coin tossing, to leading order.
C_CONST = 1.0 / math.sqrt(math.pi)
D_CONST = 1.0 / (2.0 * math.sqrt(math.pi))


@dataclass(frozen=True)
class ScaledParams:
    a: float
    b: float
    M: int
    c: float = field(default=C_CONST, init=False)
    d: float = field(default=D_CONST, init=False)

    def __post_init__(self):
        if not self.a >= 0:
            raise ConfigError(f"a must be >= 0, got {self.a}")
        if not self.b >= 0:
            raise ConfigError(f"b must be >= 0, got {self.b}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M}")

    @property
    def eps(self) -> float:
        """``M^(-1/4)``, the expansion variable."""
        return self.M ** -0.25

    @property
    def discount(self) -> float:
        return 1.0 - self.b * self.M ** -0.75


def reduced_matrix(params: ScaledParams) -> np.ndarray:
    """Column-stochastic 3x3 transition matrix over (e1, e2, e3), truncated at O(M^-1/2)."""
    a, c, e = params.a, params.c, params.eps
    hop = a * e
    leak = 0.5 * a * a * e * e
    back = c * e * e
    T = np.array(
        [
            [1.0 - hop - leak, hop, back],
            [hop, 1.0 - hop - leak, back],
            [leak, leak, 1.0 - 2.0 * back],
        ]
    )
    if np.any(T < 0.0) or np.any(T > 1.0):
        raise ConfigError(
            f"a = {a}, M = {params.M} gives entries outside [0, 1]; M is too small for this a"
        )
    return T


@dataclass(frozen=True)
class Eigenpair:
    value: float
    left: np.ndarray
    right: np.ndarray


def eigen_triple(params: ScaledParams) -> tuple[Eigenpair, Eigenpair, Eigenpair]:
    """Closed-form biorthonormal spectrum of :func:`reduced_matrix`.

    These are exact for the truncated matrix, not just to leading order.
    """
    a, c, e = params.a, params.c, params.eps
    s = a * a + 4.0 * c
    mu2 = 1.0 - 0.5 * s * e * e
    mu3 = 1.0 - 2.0 * a * e - 0.5 * a * a * e * e
    return (
        Eigenpair(1.0, np.array([1.0, 1.0, 1.0]), np.array([2 * c, 2 * c, a * a]) / s),
        Eigenpair(mu2, np.array([a * a, a * a, -4.0 * c]) / s, np.array([0.5, 0.5, -1.0])),
        Eigenpair(mu3, np.array([0.5, -0.5, 0.0]), np.array([1.0, -1.0, 0.0])),
    )


def next_day_payoffs(params: ScaledParams) -> np.ndarray:
    """Probability of winning tomorrow from e1, e2 and e3."""
    a, d, e = params.a, params.d, params.eps
    move = a * e + 0.5 * a * a * e * e
    return np.array([1.0 - move, move, 0.5 - d * e * e])


def exact_reduced_payoffs(params: ScaledParams) -> np.ndarray:
    """Discounted payoffs of the three-state model by direct solve; no asymptotic expansion."""
    lam = params.discount
    if not 0.0 <= lam < 1.0:
        raise ConfigError(f"b = {params.b} and M = {params.M} give discount {lam} outside [0, 1)")
    T = reduced_matrix(params)
    w0 = next_day_payoffs(params)
    return np.linalg.solve((np.eye(3) - lam * T).T, (1.0 - lam) * w0)


@dataclass(frozen=True)
class AsymptoticPayoff:
    value: float
    bracket: float
    u1: float
    u3: float
    order_note: str = "truncated at O(M^-1/2); O(M^-3/4) corrections omitted"


def payoff_bracket(a: float, b: float) -> float:
    """Coefficient of ``M^-1/2`` in the e2 payoff."""
    if a <= 0:
        raise ValueError("a = 0 is a pole of the b/(4a) term")
    c, d = C_CONST, D_CONST
    return -b / (4.0 * a) - d + 4.0 * d * c / (a * a + 4.0 * c)


def asymptotic_payoff_e2(a: float, b: float, M: int) -> AsymptoticPayoff:
    if a <= 0:
        raise ValueError("a = 0 is a pole of the b/(4a) term")
    c, d = C_CONST, D_CONST
    h = M ** -0.5
    br = payoff_bracket(a, b)
    u1 = 0.5 - d * a * a * h / (a * a + 4.0 * c)
    u3 = (b / (2.0 * a)) * h
    return AsymptoticPayoff(value=0.5 + h * br, bracket=br, u1=u1, u3=u3)


def stationarity_rhs(a: float) -> float:
    """Right side of ``b = 32 a^3 d c / (a^2 + 4c)^2``."""
    c, d = C_CONST, D_CONST
    return 32.0 * a**3 * d * c / (a * a + 4.0 * c) ** 2


def b_max() -> float:
    """Largest ``b`` for which win-stay lose-shift beats coin tossing; equals ``2 pi^(-3/4)``."""
    return stationarity_rhs(2.0 * math.sqrt(C_CONST))


@dataclass(frozen=True)
class AStarResult:
    b: float
    a_star: float | None
    residual: float | None
    beats_random: bool
    other_roots: tuple[float, ...] = ()

    @property
    def found(self) -> bool:
        return self.a_star is not None


def _other_roots(b: float) -> tuple[float, ...]:
    # beyond the branch the right side peaks at a^2 = 12c and then decays as 32dc/a
    c = C_CONST
    peak = math.sqrt(12.0 * c)
    lo = 2.0 * math.sqrt(c)
    f = lambda a: stationarity_rhs(a) - b
    roots = []
    if f(lo) < 0 < f(peak):
        roots.append(optimize.brentq(f, lo, peak, xtol=1e-14))
    hi = peak
    while f(hi) > 0 and hi < 1e8:
        hi *= 2.0
    if f(peak) > 0 and f(hi) < 0:
        roots.append(optimize.brentq(f, peak, hi, xtol=1e-14))
    return tuple(roots)


def solve_a_star(b: float) -> AStarResult:
    """Optimal ``a`` on the branch ``a^2 <= 4c`` where the strategy beats random."""
    if not b >= 0:
        raise ValueError(f"b must be >= 0, got {b}")
    edge = 2.0 * math.sqrt(C_CONST)
    top = b_max()
    if b > top:
        return AStarResult(b, None, None, False, _other_roots(b))
    if b == 0.0:
        return AStarResult(b, 0.0, 0.0, True, ())
    if b == top:
        a = edge
    else:
        a = optimize.bisect(lambda x: stationarity_rhs(x) - b, 0.0, edge, xtol=1e-15, maxiter=500)
    res = abs(b - stationarity_rhs(a))
    return AStarResult(b, float(a), res, a * a <= 4.0 * C_CONST, _other_roots(b))


def optimal_bracket(a_star: float) -> float:
    """Bracket evaluated at the optimum, written in terms of ``a*`` only."""
    c, d = C_CONST, D_CONST
    s = a_star * a_star + 4.0 * c
    return -d * (1.0 - 4.0 * c * (4.0 * c - a_star * a_star) / s**2)


def random_baseline(M: int) -> float:
    """Payoff of coin tossing to the same order, ``1/2 - d M^-1/2``."""
    return 0.5 - D_CONST * M**-0.5


def lambda_c1_estimate(n: int) -> tuple[float, bool]:
    """Large-N estimate ``1 - b_max M^(-3/4)`` of the first threshold.

    The flag is True when M is too small for the expansion to be trusted,
    which here means M < 100.
    """
    if int(n) != n or n < 3 or n % 2 == 0:
        raise ConfigError(f"N must be odd and >= 3, got {n}")
    m = (int(n) - 1) // 2
    return 1.0 - b_max() * m**-0.75, m < 100


def time_scales(params: ScaledParams) -> dict[str, float]:
    """Relaxation times ``1/(1 - mu)`` in days for the two decaying modes, plus the horizon."""
    _, p2, p3 = eigen_triple(params)
    out = {
        "escape_e3": 1.0 / (1.0 - p2.value),
        "hop_e1_e2": 1.0 / (1.0 - p3.value) if p3.value < 1.0 else math.inf,
    }
    out["horizon"] = 1.0 / (1.0 - params.discount) if params.b > 0 else math.inf
    return out


def a_star_table(bs: np.ndarray, M: int) -> list[dict]:
    rows = []
    base = random_baseline(M)
    for b in np.asarray(bs, dtype=float):
        r = solve_a_star(float(b))
        if r.found and r.a_star > 0:
            br = payoff_bracket(r.a_star, float(b))
            w = 0.5 + M**-0.5 * br
        elif r.found:
            # b = 0: the bracket tends to -d a^2/(a^2+4c) -> 0 as a -> 0
            br, w = 0.0, 0.5
        else:
            br, w = math.nan, math.nan
        rows.append(
            {
                "b": float(b),
                "a_star": r.a_star if r.found else math.nan,
                "bracket": br,
                "w_e2": w,
                "random_baseline": base,
                "beats_random": bool(r.found and r.beats_random and w >= base),
                "lambda": 1.0 - float(b) * M**-0.75,
            }
        )
    return rows
