"""Seeded Monte Carlo simulation of agents playing a fixed profile."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal, stats

from camg.core import ConfigError, GameConfig, StrategyProfile
from camg.markov import build_transition_matrix

GENERATOR = "numpy.random.PCG64"
BURN_IN = 0.1
TRUNCATION = 1e-12
MIN_VISITS = 100
_CHUNK = 65536


class InsufficientVisitsError(ValueError):
    def __init__(self, state: int, visits: int):
        super().__init__(f"state C_{state} visited {visits} times; need at least {MIN_VISITS}")
        self.state = state
        self.visits = visits


@dataclass(frozen=True)
class SimulationRecord:
    """Full trace of one run.

    ``choices[t, k]`` is 1 when agent k sits in restaurant A on day t; day 0
    is the coin-toss initialisation. ``win_counts[i-1]`` counts agents in
    ``C_i`` whose next day is a win, over days 0..days-2.
    """

    seed: int
    days: int
    n_agents: int
    profile: tuple[float, ...]
    generator: str
    choices: np.ndarray
    attendance: np.ndarray
    state_visits: np.ndarray
    anchor_visits: np.ndarray
    win_counts: np.ndarray
    sigma2: float

    def agent_states(self) -> np.ndarray:
        """``(days, N)`` occupancy of each agent's own restaurant."""
        n_a = self.attendance[:, None]
        return np.where(self.choices == 1, n_a, self.n_agents - n_a)

    def wins(self) -> np.ndarray:
        return self.agent_states() <= (self.n_agents - 1) // 2


def _run(probs: list[float], n: int, days: int, rng: np.random.Generator) -> np.ndarray:
    choices = np.empty((days, n), dtype=np.uint8)
    side = (rng.random(n) < 0.5).astype(np.uint8).tolist()
    choices[0] = side
    t = 1
    while t < days:
        block = min(_CHUNK, days - t)
        draws = rng.random((block, n)).tolist()
        rows = []
        for u in draws:
            n_a = sum(side)
            p_a, p_b = probs[n_a - 1] if n_a else 0.0, probs[n - n_a - 1] if n_a < n else 0.0
            side = [s ^ (uk < (p_a if s else p_b)) for s, uk in zip(side, u)]
            rows.append(side)
        choices[t : t + block] = rows
        t += block
    return choices


def simulate(profile: StrategyProfile, config: GameConfig, days: int, seed: int) -> SimulationRecord:
    profile.check(config)
    if int(days) != days or days < 1:
        raise ConfigError(f"days must be a positive integer, got {days}")
    n = config.n_agents
    rng = np.random.Generator(np.random.PCG64(seed))
    choices = _run(list(profile.probs), n, int(days), rng)
    attendance = choices.sum(axis=1, dtype=np.int64)

    states = np.where(choices == 1, attendance[:, None], n - attendance[:, None])
    visits = np.bincount(states.ravel() - 1, minlength=n)
    wins_next = states[1:] <= config.m_half
    anchors = states[:-1].ravel() - 1
    anchor_visits = np.bincount(anchors, minlength=n)
    win_counts = np.bincount(anchors, weights=wins_next.ravel(), minlength=n).astype(np.int64)

    diff = 2 * attendance[int(BURN_IN * days):] - n
    sigma2 = float(diff.var()) if diff.size else 0.0
    return SimulationRecord(
        seed=int(seed),
        days=int(days),
        n_agents=n,
        profile=profile.probs,
        generator=GENERATOR,
        choices=choices,
        attendance=attendance,
        state_visits=visits,
        anchor_visits=anchor_visits,
        win_counts=win_counts,
        sigma2=sigma2,
    )


def _batch_se(values: np.ndarray, batches: int = 50) -> float:
    chunks = [c for c in np.array_split(values, batches) if c.size]
    if len(chunks) < 2:
        return math.nan
    means = np.array([c.mean() for c in chunks])
    return float(means.std(ddof=1) / math.sqrt(len(means)))


def truncation_horizon(discount: float) -> int:
    """Number of terms kept: the sum stops before ``lambda^tau`` drops below 1e-12."""
    if discount == 0.0:
        return 1
    return int(math.ceil(math.log(TRUNCATION) / math.log(discount)))


def empirical_discounted_payoff(record: SimulationRecord, discount: float, state: int) -> tuple[float, float]:
    """Mean of ``(1-lambda) sum_tau lambda^tau win(t+1+tau)`` over days t spent in ``C_state``.

    Returns ``(estimate, standard error)``; the error uses batch means over
    time because overlapping windows are correlated.
    """
    if not 0.0 <= discount < 1.0:
        raise ConfigError(f"discount must lie in [0, 1), got {discount}")
    if not 1 <= state <= record.n_agents:
        raise ConfigError(f"state must lie in 1..{record.n_agents}, got {state}")
    h = truncation_horizon(discount)
    states = record.agent_states()
    win = (states <= (record.n_agents - 1) // 2).astype(float)
    # suffix sums S[t] = sum_{s>=t} lambda^(s-t) win[s], computed backwards
    suffix = signal.lfilter([1.0], [1.0, -discount], win[::-1], axis=0)[::-1]
    last = record.days - 1 - h  # anchor t needs days t+1 .. t+h
    if last < 0:
        raise InsufficientVisitsError(state, 0)
    ext = np.concatenate([suffix, np.zeros((h + 1, record.n_agents))])
    # truncated window over days t+1 .. t+h
    window = ext[1 : last + 2] - discount**h * ext[1 + h : last + 2 + h]
    window *= 1.0 - discount
    mask = states[: last + 1] == state
    count = int(mask.sum())
    if count < MIN_VISITS:
        raise InsufficientVisitsError(state, count)
    per_day = (window * mask).sum(axis=1)
    n_day = mask.sum(axis=1)
    keep = n_day > 0
    estimate = float(per_day.sum() / count)
    # ratio estimator: batch means of per-day sums over per-day counts
    chunks = [(s, c) for s, c in zip(np.array_split(per_day[keep], 50), np.array_split(n_day[keep], 50)) if c.sum()]
    ratios = np.array([s.sum() / c.sum() for s, c in chunks])
    se = float(ratios.std(ddof=1) / math.sqrt(len(ratios))) if len(ratios) > 1 else math.nan
    return estimate, se


def empirical_state_frequencies(record: SimulationRecord) -> tuple[np.ndarray, np.ndarray]:
    """Post-burn-in fraction of time the marked agent spends in each state, with batch-means errors."""
    n = record.n_agents
    states = record.agent_states()[int(BURN_IN * record.days):]
    if states.shape[0] == 0:
        raise ConfigError("record too short for the burn-in window")
    onehot = np.stack([(states == i).mean(axis=1) for i in range(1, n + 1)], axis=1)
    freq = onehot.mean(axis=0)
    se = np.array([_batch_se(onehot[:, i]) for i in range(n)])
    return freq, se


def empirical_win_rates(record: SimulationRecord) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return record.win_counts / record.anchor_visits


def empirical_sigma2(record: SimulationRecord) -> float:
    """Variance of ``2n - N`` per agent over the post-burn-in window."""
    return record.sigma2 / record.n_agents


def transition_counts(record: SimulationRecord, agent: int = 0) -> np.ndarray:
    """``counts[j-1, i-1]`` = number of days agent went from ``C_i`` to ``C_j``."""
    n = record.n_agents
    s = record.agent_states()[:, agent] - 1
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (s[1:], s[:-1]), 1)
    return counts


@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    dof: int
    critical: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical


def chain_chi_square(record: SimulationRecord, agent: int = 0, level: float = 0.999) -> ChiSquare:
    """Pearson test of observed one-step transitions against the analytic matrix."""
    T = build_transition_matrix(StrategyProfile(record.profile))
    counts = transition_counts(record, agent)
    stat, dof = 0.0, 0
    for i in range(record.n_agents):
        total = counts[:, i].sum()
        if total == 0:
            continue
        expected = total * T[:, i]
        used = expected > 0
        if np.any(counts[~used, i] > 0):
            return ChiSquare(math.inf, max(dof, 1), stats.chi2.ppf(level, max(dof, 1)))
        stat += float(((counts[used, i] - expected[used]) ** 2 / expected[used]).sum())
        dof += int(used.sum()) - 1
    dof = max(dof, 1)
    return ChiSquare(stat, dof, float(stats.chi2.ppf(level, dof)))


def relaxation_time(record: SimulationRecord) -> int | None:
    """First day the population is split (M, M+1); None if it never happens."""
    m = (record.n_agents - 1) // 2
    hit = np.flatnonzero((record.attendance == m) | (record.attendance == m + 1))
    return int(hit[0]) if hit.size else None


def summary(record: SimulationRecord) -> dict:
    freq, se = empirical_state_frequencies(record)
    return {
        "seed": record.seed,
        "generator": record.generator,
        "days": record.days,
        "n_agents": record.n_agents,
        "profile": list(record.profile),
        "burn_in_fraction": BURN_IN,
        "state_frequencies": freq.tolist(),
        "state_frequency_se": se.tolist(),
        "state_visits": record.state_visits.tolist(),
        "win_rates": [None if math.isnan(x) else float(x) for x in empirical_win_rates(record)],
        "sigma2_per_agent": empirical_sigma2(record),
        "relaxation_time": relaxation_time(record),
    }


def write_attendance_csv(record: SimulationRecord, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day", "attendance"])
        w.writerows(enumerate(record.attendance.tolist()))


def write_summary_json(record: SimulationRecord, path: Path) -> None:
    Path(path).write_text(json.dumps(summary(record), indent=2, sort_keys=True) + "\n", encoding="utf-8")
