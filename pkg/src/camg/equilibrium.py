"""Co-action equilibria: best responses, pair phases, fixed points and lambda thresholds.

Agents sharing a state choose their jump probability jointly, so a best
response for state ``C_i`` maximizes ``W_i`` over the common value ``p_i``
with every other entry held fixed. Pairs of states ``(i, N-i)`` are then
classified from landmarks of the best-response picture in the
``(p_{N-i}, p_i)`` plane:

* ``A`` - largest ``p_{N-i}`` for which the minority side still answers 0,
* ``B`` - best majority answer when the minority stays put (``p_i = 0``),
* ``C``, ``D`` - points on ``p_i = 0`` where ``W_{N-i}`` and ``W_i`` equal
  ``W'``, their common value with the pair reset to 1/2.

A pair is RANDOM while ``A <= C``, EDGE at ``(0, A)`` once ``A > C`` and
INTERIOR at ``(0, B)`` once ``B < A``.
"""

from __future__ import annotations

import enum
import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from camg.core import ConfigError, GameConfig, StrategyProfile, canonicalize, make_config
from camg.markov import branch_laws, build_transition_matrix, steady_state, transition_batch, transition_columns
from camg.payoff import discounted_payoffs, inefficiency, payoffs_batch, payoffs_from_matrices

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
HEURISTIC_ABOVE_N = 9
_DERIV_STEP = 1e-7
_FLAT = 1e-14


class Phase(str, enum.Enum):
    RANDOM = "RANDOM"
    EDGE = "EDGE"
    INTERIOR = "INTERIOR"

    @property
    def rank(self) -> int:
        return ("RANDOM", "EDGE", "INTERIOR").index(self.value)


@dataclass(frozen=True)
class PairPhase:
    pair: tuple[int, int]
    phase: Phase


# -- one-dimensional maximization --------------------------------------------


def golden_max(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200) -> tuple[float, float]:
    """Golden-section search for a maximum of a unimodal ``f`` on ``[lo, hi]``."""
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    x = 0.5 * (lo + hi)
    return x, f(x)


@functools.lru_cache(maxsize=512)
def _base_matrix(probs: tuple[float, ...]) -> np.ndarray:
    T = transition_batch(np.array(probs))[0]
    T.setflags(write=False)
    return T


def _state_payoff(base: np.ndarray, discount: float, state: int, entry: int, xs) -> np.ndarray:
    """``W_state`` as ``p_entry`` runs over ``xs`` (both 1-based), other entries from ``base``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    n = base.size
    P = np.repeat(base[None, :], xs.size, axis=0)
    P[:, entry - 1] = xs
    cols = sorted({entry, n - entry} - {0})
    T = np.repeat(_base_matrix(tuple(base.tolist()))[None], xs.size, axis=0)
    T[:, :, [c - 1 for c in cols]] = transition_columns(P, cols)
    return payoffs_from_matrices(T, discount)[:, state - 1]


def _maximize_entry(base: np.ndarray, discount: float, state: int, grid: int, tol: float) -> float:
    """Grid scan over ``p_state`` then golden refinement; ties go to the smaller p."""
    xs = np.linspace(0.0, 1.0, grid)
    vals = _state_payoff(base, discount, state, state, xs)
    k = int(np.argmax(vals))  # first maximum, i.e. the smallest p among ties
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, grid - 1)]

    def f(x):
        return float(_state_payoff(base, discount, state, state, [x])[0])

    x, fx = golden_max(f, lo, hi, tol)
    if fx > vals[k] + _FLAT:
        return _polish(f, x, lo, hi)
    return float(xs[k])


def _polish(f, x: float, lo: float, hi: float, h: float = 1e-5, steps: int = 3) -> float:
    """Newton steps on central differences; golden search alone stalls near sqrt(eps) on flat maxima."""
    for _ in range(steps):
        if x - h < lo or x + h > hi:
            break
        fm, f0, fp = f(x - h), f(x), f(x + h)
        curv = (fp - 2.0 * f0 + fm) / (h * h)
        if not curv < 0:
            break
        step = -(fp - fm) / (2.0 * h) / curv
        if abs(step) > h or not lo <= x + step <= hi:
            break
        x += step
    return float(x)


def best_response(i: int, profile: StrategyProfile, config: GameConfig) -> float:
    """Jump probability maximizing ``W_i`` when all agents in ``C_i`` adopt it together."""
    profile.check(config)
    if not 1 <= i <= config.n_agents:
        raise ConfigError(f"state must lie in 1..{config.n_agents}, got {i}")
    return _maximize_entry(profile.array(), config.discount, i, config.grid, config.tol)


# -- landmarks ---------------------------------------------------------------


@dataclass(frozen=True)
class Landmarks:
    pair: tuple[int, int]
    A: float
    B: float
    C: float | None
    D: float | None
    w_prime: float

    @property
    def random_edge_indicator(self) -> float:
        """``A - C``; positive once the edge point beats the random point for the majority."""
        return self.A - (1.0 if self.C is None else self.C)

    @property
    def edge_interior_indicator(self) -> float:
        """``A - B``; positive once the interior answer ``B`` lies left of ``A``."""
        return self.A - self.B

    def phase(self, tol: float = 0.0) -> Phase:
        # at an exact tie the lower-lambda phase is kept
        if self.random_edge_indicator <= tol:
            return Phase.RANDOM
        if self.edge_interior_indicator <= tol:
            return Phase.EDGE
        return Phase.INTERIOR

    def values(self, phase: Phase) -> tuple[float, float]:
        if phase is Phase.RANDOM:
            return 0.5, 0.5
        if phase is Phase.EDGE:
            return 0.0, self.A
        return 0.0, self.B


def _answers_zero(base: np.ndarray, discount: float, i: int, o: int, x: float, scan: int) -> bool:
    """True when the minority best answer to ``p_o = x`` is ``p_i = 0``."""
    P = base.copy()
    P[o - 1] = x
    xs = np.concatenate([[0.0, _DERIV_STEP], np.linspace(0.0, 1.0, scan)[1:]])
    w = _state_payoff(P, discount, i, i, xs)
    return bool(w[1] <= w[0] and w.max() <= w[0] + _FLAT)


def _edge_point(base: np.ndarray, discount: float, i: int, o: int, tol: float, scan: int = 201) -> float:
    coarse = np.linspace(0.0, 0.5, 26)
    prev = None
    for x in coarse:
        if not _answers_zero(base, discount, i, o, x, scan):
            break
        prev = x
    else:
        return 0.5
    if prev is None:
        return 0.0
    lo, hi = prev, x
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _answers_zero(base, discount, i, o, mid, scan):
            lo = mid
        else:
            hi = mid
    return float(lo)


def _first_root(g, lo: float, hi: float, tol: float, samples: int = 101) -> float | None:
    xs = np.linspace(lo, hi, samples)
    vals = np.array([g(x) for x in xs])
    sign = np.sign(vals)
    for k in range(samples - 1):
        if sign[k] == 0:
            return float(xs[k])
        if sign[k] != sign[k + 1]:
            return float(optimize.brentq(g, xs[k], xs[k + 1], xtol=tol))
    return None


def landmarks(i: int, profile: StrategyProfile, config: GameConfig) -> Landmarks:
    """Landmarks A, B, C, D of pair ``(i, N-i)``, ``2 <= i <= M``, under the other entries of ``profile``."""
    profile.check(config)
    n, m = config.n_agents, config.m_half
    if not 1 <= i <= m:
        raise ConfigError(f"pair index must lie in 1..{m}, got {i}")
    o = n - i
    lam, tol = config.discount, config.tol
    base = profile.array()

    reset = base.copy()
    reset[i - 1] = reset[o - 1] = 0.5
    w_prime = float(payoffs_batch(reset[None, :], lam)[0, i - 1])

    A = _edge_point(base, lam, i, o, tol)

    axis = base.copy()
    axis[i - 1] = 0.0
    B = _maximize_entry(axis, lam, o, config.grid, tol)

    def majority_gap(x):
        return float(_state_payoff(axis, lam, o, o, [x])[0]) - w_prime

    def minority_gap(x):
        return float(_state_payoff(axis, lam, i, o, [x])[0]) - w_prime

    C = None
    if majority_gap(B) > 0:
        C = float(optimize.brentq(majority_gap, 0.0, B, xtol=tol)) if B > 0 else 0.0
    D = _first_root(minority_gap, 0.0, 1.0, tol)
    return Landmarks((i, o), float(A), float(B), C, D, w_prime)


@dataclass(frozen=True)
class BestResponseCurves:
    pair: tuple[int, int]
    grid: np.ndarray
    minority_response: np.ndarray  # r_i(p_{N-i}) sampled on ``grid``
    majority_response: np.ndarray  # r_{N-i}(p_i) sampled on ``grid``
    landmarks: Landmarks
    P: tuple[float, float] = (0.5, 0.5)


def best_response_curves(
    pair: int | tuple[int, int], profile: StrategyProfile, config: GameConfig, samples: int = 51
) -> BestResponseCurves:
    """Sample both best-response curves of a pair together with its landmarks."""
    i = pair[0] if isinstance(pair, tuple) else pair
    o = config.n_agents - i
    xs = np.linspace(0.0, 1.0, samples)
    base = profile.array()
    r_min = np.empty(samples)
    r_maj = np.empty(samples)
    for k, x in enumerate(xs):
        P = base.copy()
        P[o - 1] = x
        r_min[k] = _maximize_entry(P, config.discount, i, config.grid, config.tol)
        P = base.copy()
        P[i - 1] = x
        r_maj[k] = _maximize_entry(P, config.discount, o, config.grid, config.tol)
    return BestResponseCurves((i, o), xs, r_min, r_maj, landmarks(i, profile, config))


# -- fixed point --------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumSolution:
    profile: StrategyProfile
    payoffs: tuple[float, ...]
    phases: tuple[PairPhase, ...]
    eta: float
    w_avg: float
    discount: float
    converged: bool
    iterations: int
    oscillation: bool = False
    heuristic: bool = False
    landmarks: tuple[Landmarks, ...] = field(default=(), repr=False)

    @property
    def n_agents(self) -> int:
        return self.profile.n_agents

    def phase_of(self, i: int) -> Phase:
        for pp in self.phases:
            if pp.pair[0] == i:
                return pp.phase
        raise KeyError(i)

    def to_dict(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "lambda": self.discount,
            "profile": list(self.profile.probs),
            "payoffs": list(self.payoffs),
            "phases": [{"pair": list(pp.pair), "phase": pp.phase.value} for pp in self.phases],
            "w_avg": self.w_avg,
            "eta": self.eta,
            "converged": self.converged,
            "iterations": self.iterations,
            "oscillation": self.oscillation,
            "heuristic": self.heuristic,
            "landmarks": [
                {"pair": list(lm.pair), "A": lm.A, "B": lm.B, "C": lm.C, "D": lm.D, "w_prime": lm.w_prime}
                for lm in self.landmarks
            ],
        }


def _random_start(n: int) -> np.ndarray:
    p = np.full(n, 0.5)
    p[0] = 0.0
    return p


def solve_coaction(
    config: GameConfig,
    initial: StrategyProfile | None = None,
    max_iter: int = 60,
    fixed_point_tol: float = 1e-8,
    order: list[int] | None = None,
) -> EquilibriumSolution:
    """Self-consistent co-action profile for ``config``.

    ``p_N`` is pinned to 1/2 and ``p_1`` to 0. Each sweep classifies the pairs
    from the innermost ``(M, M+1)`` outwards (or in ``order``), sets their
    probabilities, then re-optimizes ``p_{N-1}``; sweeps repeat until no entry
    moves by more than ``fixed_point_tol``. A pair whose phase flips back and
    forth is held at the lower phase; a continuous 2-cycle is damped by 1/2.
    """
    n, m = config.n_agents, config.m_half
    lam = config.discount
    if initial is None:
        p = _random_start(n)
    else:
        initial.check(config)
        p = initial.array()
    p[0], p[n - 1] = 0.0, 0.5
    pairs = list(range(m, 1, -1)) if order is None else list(order)

    held: dict[int, Phase] = {}
    damping = 1.0
    history: list[np.ndarray] = [p.copy()]
    phase_history: list[dict[int, Phase]] = []
    converged = oscillation = False
    marks: dict[int, Landmarks] = {}
    it = 0
    for it in range(1, max_iter + 1):
        old = p.copy()
        phases: dict[int, Phase] = {}
        for i in pairs:
            prof = StrategyProfile(tuple(p))
            lm = landmarks(i, prof, config)
            marks[i] = lm
            ph = held.get(i, lm.phase(config.tol))
            phases[i] = ph
            lo, hi = lm.values(ph)
            p[i - 1] = old[i - 1] + damping * (lo - old[i - 1])
            p[n - i - 1] = old[n - i - 1] + damping * (hi - old[n - i - 1])
        new_top = _maximize_entry(p, lam, n - 1, config.grid, config.tol)
        p[n - 2] = old[n - 2] + damping * (new_top - old[n - 2])
        phase_history.append(phases)
        history.append(p.copy())

        delta = float(np.abs(p - old).max())
        if delta < fixed_point_tol:
            converged = True
            break
        if len(history) >= 3 and np.abs(history[-1] - history[-3]).max() < fixed_point_tol:
            oscillation = True
            prev = phase_history[-2] if len(phase_history) >= 2 else {}
            flipping = [i for i in phases if prev.get(i, phases[i]) is not phases[i]]
            if flipping:
                for i in flipping:
                    held[i] = min(phases[i], prev[i], key=lambda ph: ph.rank)
                log.debug("lambda=%g: phase 2-cycle on pairs %s, holding lower phase", lam, flipping)
            else:
                damping = 0.5
    prof = canonicalize(StrategyProfile(tuple(float(x) for x in p)))
    T = build_transition_matrix(prof)
    w = discounted_payoffs(T, lam)
    w_avg = float(steady_state(T).distribution[:m].sum())
    phase_list = [PairPhase((1, n - 1), Phase.INTERIOR)]
    phase_list += [PairPhase((i, n - i), phases[i]) for i in sorted(phases)]
    if not converged:
        log.warning("co-action solve for N=%d lambda=%g stopped after %d sweeps", n, lam, it)
    return EquilibriumSolution(
        profile=prof,
        payoffs=tuple(float(x) for x in w),
        phases=tuple(phase_list),
        eta=inefficiency(w_avg, n),
        w_avg=w_avg,
        discount=lam,
        converged=converged,
        iterations=it,
        oscillation=oscillation,
        heuristic=n > HEURISTIC_ABOVE_N,
        landmarks=tuple(marks[i] for i in sorted(marks)),
    )


def sweep(
    n: int,
    lambdas,
    tol: float = 1e-10,
    grid: int = 2001,
) -> list[EquilibriumSolution]:
    """Solve along increasing ``lambdas``, each solve warm-started from the previous one."""
    out = []
    prev = None
    for lam in sorted(float(x) for x in lambdas):
        sol = solve_coaction(make_config(n, lam, tol, grid), initial=prev)
        out.append(sol)
        prev = sol.profile
    return out


# -- thresholds ---------------------------------------------------------------


@dataclass(frozen=True)
class Threshold:
    lam: float
    pair: tuple[int, int]
    transition: str
    bracket: tuple[float, float]


def _phase_map(sol: EquilibriumSolution) -> dict[int, Phase]:
    return {pp.pair[0]: pp.phase for pp in sol.phases if pp.pair[0] > 1}


def threshold_scan(
    n: int,
    lam_from: float = 0.0,
    lam_to: float = 0.999,
    step: float = 0.01,
    resolution: float = 1e-4,
    tol: float = 1e-10,
    grid: int = 2001,
) -> list[Threshold]:
    """Locate every lambda at which a pair changes phase.

    A coarse warm-started sweep brackets each change of sign of the pair
    indicators (``A - C`` then ``A - B``); each bracket is then bisected to
    ``resolution``, re-solving at the midpoint from the lower-lambda side so
    the indicators are always read at a self-consistent profile.
    """
    make_config(n, lam_from)
    count = int(math.floor((lam_to - lam_from) / step + 1e-9))
    lams = [lam_from + k * step for k in range(count + 1)]
    if lams[-1] < lam_to - 1e-12:
        lams.append(lam_to)
    sols = sweep(n, lams, tol, grid)
    found: list[Threshold] = []
    for k in range(len(sols) - 1):
        lo_sol, hi_sol = sols[k], sols[k + 1]
        lo_ph, hi_ph = _phase_map(lo_sol), _phase_map(hi_sol)
        for i in sorted(lo_ph, reverse=True):
            if lo_ph[i] is hi_ph[i]:
                continue
            lo, hi = lams[k], lams[k + 1]
            cur = lo_sol
            while hi - lo > resolution:
                mid = 0.5 * (lo + hi)
                sol = solve_coaction(make_config(n, mid, tol, grid), initial=cur.profile)
                if _phase_map(sol)[i] is lo_ph[i]:
                    lo, cur = mid, sol
                else:
                    hi = mid
            end_sol = solve_coaction(make_config(n, hi, tol, grid), initial=cur.profile)
            label = f"{lo_ph[i].value}->{_phase_map(end_sol)[i].value}"
            found.append(Threshold(0.5 * (lo + hi), (i, n - i), label, (lo, hi)))
    found.sort(key=lambda t: t.lam)
    return found


# -- N = 3 closed forms -----------------------------------------------------


def n3_cubic(p: float, lam: float) -> float:
    """Stationarity polynomial of ``W_2`` for N = 3 in ``p = p_2``."""
    return (
        16.0
        - 32.0 * p
        - (24.0 - 56.0 * p + 32.0 * p**2) * lam
        + (9.0 - 28.0 * p + 40.0 * p**2 - 96.0 * p**3 + 144.0 * p**4 - 64.0 * p**5) * lam**2
        - (1.0 - 4.0 * p + 8.0 * p**2 - 24.0 * p**3 + 48.0 * p**4 - 32.0 * p**5) * lam**3
    )


def n3_payoff_w2(p2: float, lam: float) -> float:
    """Closed-form discounted payoff of state C_2 for N = 3, ``p_1 = 0``, ``p_3 = 1/2``."""
    q2 = 1.0 - p2
    num = 4.0 * p2 * q2 - lam * p2 * (q2 - p2)
    den = (1.0 - lam * q2 * (q2 - p2)) * (4.0 + lam * (4.0 * p2 * p2 - 1.0))
    return num / den


def cubic_root_n3(lam: float) -> float:
    """Root in [0, 1/2] of the N = 3 stationarity polynomial, by bisection."""
    if not (0.0 <= lam < 1.0):
        raise ConfigError(f"discount must lie in [0, 1), got {lam}")
    f0, f1 = n3_cubic(0.0, lam), n3_cubic(0.5, lam)
    if f1 == 0.0:
        return 0.5
    if f0 * f1 > 0:
        raise ArithmeticError(f"no sign change of the N=3 polynomial on [0, 1/2] at lambda={lam}")
    return float(optimize.bisect(n3_cubic, 0.0, 0.5, args=(lam,), xtol=1e-15, maxiter=200))


# -- trapping states ----------------------------------------------------------


@dataclass(frozen=True)
class TrapReport:
    n_agents: int
    nash_fixed_point: tuple[float, float]  # (p_M, p_{M+1})
    nash_iterations: int
    absorbing_states: tuple[int, ...]
    reducible: bool
    majority_payoff: float
    minority_payoff: float
    coaction_response: float
    coaction_expected: float

    @property
    def trapped(self) -> bool:
        m = (self.n_agents - 1) // 2
        return (
            self.nash_fixed_point == (0.0, 0.0)
            and self.reducible
            and {m, m + 1} <= set(self.absorbing_states)
            and self.majority_payoff == 0.0
        )

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["trapped"] = self.trapped
        return out


def single_deviator_response(j: int, profile: StrategyProfile) -> float:
    """Next-day best jump probability of one agent in ``C_j`` whose peers keep their strategy.

    The payoff is linear in the deviator's own probability, so the answer is
    0 or 1; ties go to 0.
    """
    n = profile.n_agents
    m = (n - 1) // 2
    po = profile.p(n - j) if j < n else 0.0
    stay, jump = branch_laws(j, profile.p(j), po, n)
    return 0.0 if stay[:m].sum() >= jump[:m].sum() else 1.0


def nash_trap_diagnostic(config: GameConfig) -> TrapReport:
    """Show that single-deviator reasoning freezes an ``(M, M+1)`` split.

    Starting from a minority that stays put and a majority using its co-action
    answer, the two sides alternately take single-deviator next-day best
    responses (majority first); the pair collapses to
    ``p_M = p_{M+1} = 0`` and the resulting chain leaves the majority on the
    losing side forever.
    """
    n, m = config.n_agents, config.m_half
    zero_cfg = config.with_discount(0.0)
    expected = 1.0 - (m + 1) ** (-1.0 / m)
    probs = np.full(n, 0.5)
    probs[m - 1] = 0.0
    probs[m] = expected
    prof = StrategyProfile(tuple(probs))
    coaction = best_response(m + 1, prof.with_entries({m: 0.0}), zero_cfg)
    it = 0
    for it in range(1, 101):
        # majority answers first, then the minority answers the updated majority
        nxt = prof.with_entries({m + 1: single_deviator_response(m + 1, prof)})
        nxt = nxt.with_entries({m: single_deviator_response(m, nxt)})
        if nxt == prof:
            break
        prof = nxt
    T = build_transition_matrix(prof)
    ss = steady_state(T)
    absorbing = tuple(j for j in range(1, n + 1) if T[j - 1, j - 1] == 1.0)
    w = discounted_payoffs(T, config.discount)
    return TrapReport(
        n_agents=n,
        nash_fixed_point=(prof.p(m), prof.p(m + 1)),
        nash_iterations=it,
        absorbing_states=absorbing,
        reducible=not ss.irreducible,
        majority_payoff=float(w[m]),
        minority_payoff=float(w[m - 1]),
        coaction_response=coaction,
        coaction_expected=expected,
    )

