"""Discounted payoffs, steady-state gain and the inefficiency parameter."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from camg.core import ConfigError, GameConfig, StrategyProfile, minority_mask
from camg.markov import build_transition_matrix, steady_state, transition_batch


class NumericError(ArithmeticError):
    """A linear solve was too ill-conditioned to trust."""


_MAX_CONDITION = 1e13


def discounted_payoffs(T: np.ndarray, discount: float) -> np.ndarray:
    """``W_j = (1-lambda) <L| T (1 - lambda T)^-1 |j>`` for every state j.

    One solve of ``x^T (1 - lambda T) = (1 - lambda) <L| T`` gives all states.
    Tomorrow is the first counted day; today's outcome is excluded.
    """
    if not (0.0 <= discount < 1.0):
        raise ConfigError(f"discount must lie in [0, 1), got {discount}")
    n = T.shape[0]
    A = np.eye(n) - discount * T
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise NumericError(f"resolvent solve ill-conditioned (cond ~ {cond:.3e})")
    rhs = (1.0 - discount) * (minority_mask(n) @ T)
    return np.linalg.solve(A.T, rhs)


def payoffs_from_matrices(T: np.ndarray, discount: float) -> np.ndarray:
    """Discounted payoffs for a stack of transition matrices, shape (K, N, N) -> (K, N)."""
    n = T.shape[-1]
    rhs = (1.0 - discount) * np.einsum("i,kij->kj", minority_mask(n), T)
    A = np.eye(n)[None, :, :] - discount * T
    return np.linalg.solve(np.transpose(A, (0, 2, 1)), rhs[..., None])[..., 0]


def payoffs_batch(probs: np.ndarray, discount: float) -> np.ndarray:
    """Discounted payoffs for a stack of profiles, shape (K, N) -> (K, N)."""
    return payoffs_from_matrices(transition_batch(probs), discount)


def profile_payoffs(profile: StrategyProfile, discount: float) -> np.ndarray:
    return discounted_payoffs(build_transition_matrix(profile), discount)


def payoff_series(T: np.ndarray, discount: float, horizon: int = 10_000) -> np.ndarray:
    """Truncated series ``(1-lambda) sum_tau lambda^tau <L| T^(tau+1)``; independent check of the solve."""
    row = minority_mask(T.shape[0]) @ T
    total = np.zeros_like(row)
    weight = 1.0 - discount
    for _ in range(horizon):
        total += weight * row
        weight *= discount
        if weight < 1e-300:
            break
        row = row @ T
    return total


def w_rand(n: int) -> float:
    """Payoff per agent per day when everyone tosses a fair coin."""
    if n < 3 or n % 2 == 0:
        raise ConfigError(f"N must be odd and >= 3, got {n}")
    m = (n - 1) // 2
    # exact in log space so large N does not overflow
    log_term = math.lgamma(n) - math.lgamma(m + 1) - math.lgamma(n - m) - n * math.log(2.0)
    return 0.5 - math.exp(log_term)


def average_payoff(profile: StrategyProfile, config: GameConfig | None = None) -> float:
    """Steady-state probability that the marked agent is in the minority.

    Reducible chains use the long-run law reached from a coin-toss start
    (see :func:`camg.markov.steady_state`).
    """
    if config is not None:
        profile.check(config)
    pi = steady_state(build_transition_matrix(profile)).distribution
    m = (profile.n_agents - 1) // 2
    return float(pi[:m].sum())


def inefficiency(w_avg: float, n: int) -> float:
    """``(W_max - W_avg) / (W_max - W_rand)``: 1 at the coin-toss baseline, 0 at full efficiency."""
    m = (n - 1) // 2
    w_max = m / n
    return (w_max - w_avg) / (w_max - w_rand(n))


@dataclass(frozen=True)
class PayoffReport:
    per_state: tuple[float, ...]
    average: float
    inefficiency: float
    baseline_rand: float
    w_max: float
    irreducible: bool = True

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_state"] = list(self.per_state)
        return out


def payoff_report(profile: StrategyProfile, config: GameConfig) -> PayoffReport:
    profile.check(config)
    T = build_transition_matrix(profile)
    w = discounted_payoffs(T, config.discount)
    ss = steady_state(T)
    avg = float(ss.distribution[: config.m_half].sum())
    return PayoffReport(
        per_state=tuple(float(x) for x in w),
        average=avg,
        inefficiency=inefficiency(avg, config.n_agents),
        baseline_rand=w_rand(config.n_agents),
        w_max=config.w_max,
        irreducible=ss.irreducible,
    )
