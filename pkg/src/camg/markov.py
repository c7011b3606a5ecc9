"""Agent-centric transition matrix, its full-configuration oracle and steady states.

All matrices are column-stochastic: entry ``(k, j)`` (0-based ``[k-1, j-1]``)
is the probability that the marked agent is in ``C_k`` tomorrow given that it
is in ``C_j`` today, so distributions evolve as ``prob_next = T @ prob``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.sparse.csgraph import connected_components

from camg.core import ConfigError, GameConfig, StrategyProfile

MAX_FULL_AGENTS = 12
_LOG_SPACE_ABOVE = 40


class BlockStructureError(ArithmeticError):
    def __init__(self, off_block: float, tol: float):
        super().__init__(
            f"off-block magnitude {off_block:.3e} exceeds {tol:.1e}; "
            "matrix was not built from a valid profile"
        )
        self.off_block = off_block


@functools.lru_cache(maxsize=None)
def _binom_coef(n: int) -> np.ndarray:
    return np.array([float(math.comb(n, x)) for x in range(n + 1)])


def _binom_rows(n: int, p: np.ndarray) -> np.ndarray:
    """Binomial(n, p) pmf over 0..n for each probability in ``p``; shape (K, n+1)."""
    k = np.arange(n + 1)
    if n > _LOG_SPACE_ABOVE:
        return stats.binom.pmf(k[None, :], n, p[:, None])
    return _binom_coef(n) * p[:, None] ** k * (1.0 - p[:, None]) ** (n - k)


def _convolve_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0], a.shape[1] + b.shape[1] - 1))
    for s in range(a.shape[1]):
        out[:, s : s + b.shape[1]] += a[:, s : s + 1] * b
    return out


def transition_columns(probs: np.ndarray, columns) -> np.ndarray:
    """Selected columns (1-based states) of the transition matrices of a stack of profiles.

    Column j only depends on ``p_j`` and ``p_{N-j}``, which lets callers that
    vary one entry rebuild two columns instead of the whole matrix.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    K, n = probs.shape
    out = np.empty((K, n, len(columns)))
    zeros = np.zeros(K)
    for c, j in enumerate(columns):
        pj = probs[:, j - 1]
        po = probs[:, n - j - 1] if j < n else zeros
        stay = _convolve_rows(_binom_rows(j - 1, 1.0 - pj), _binom_rows(n - j, po))
        jump = _convolve_rows(_binom_rows(j - 1, pj), _binom_rows(n - j, 1.0 - po))
        out[:, :, c] = (1.0 - pj)[:, None] * stay + pj[:, None] * jump
    return out


def transition_batch(probs: np.ndarray) -> np.ndarray:
    """Transition matrices for a stack of profiles, ``probs`` of shape (K, N).

    A marked agent in ``C_j`` has ``j-1`` companions jumping with ``p_j`` and
    ``N-j`` opponents jumping with ``p_{N-j}``. Staying, the new occupancy is
    one plus the companions who stay plus the opponents who arrive; jumping,
    it is one plus the companions who also jump plus the opponents who stay.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    return transition_columns(probs, range(1, probs.shape[1] + 1))


def branch_laws(j: int, pj: float, po: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Occupancy laws (index k-1 for occupancy k) of a marked agent in ``C_j`` who stays / jumps."""
    a = np.array([pj])
    b = np.array([po])
    stay = _convolve_rows(_binom_rows(j - 1, 1.0 - a), _binom_rows(n - j, b))[0]
    jump = _convolve_rows(_binom_rows(j - 1, a), _binom_rows(n - j, 1.0 - b))[0]
    return stay, jump


def build_transition_matrix(profile: StrategyProfile, config: GameConfig | None = None) -> np.ndarray:
    """The N x N agent-centric transition matrix of ``profile``."""
    if config is not None:
        profile.check(config)
    return transition_batch(profile.array()[None, :])[0]


# -- full 2^N configuration chain -------------------------------------------


@dataclass(frozen=True)
class FullConfigMatrix:
    """Exact chain over joint restaurant choices; bit ``a`` of a label is agent ``a``'s restaurant."""

    entries: np.ndarray
    n_agents: int
    profile: StrategyProfile

    def occupancy(self, agent: int) -> np.ndarray:
        """Occupancy of ``agent``'s restaurant (1..N) in every configuration."""
        bits = _config_bits(self.n_agents)
        same = bits == bits[:, [agent]]
        return same.sum(axis=1)


def _config_bits(n: int) -> np.ndarray:
    labels = np.arange(2**n)
    return (labels[:, None] >> np.arange(n)[None, :]) & 1


def build_full_matrix(profile: StrategyProfile, config: GameConfig | None = None) -> FullConfigMatrix:
    """Enumerate all 2^N joint configurations; every agent jumps independently."""
    n = profile.n_agents
    if config is not None:
        profile.check(config)
    if n > MAX_FULL_AGENTS:
        raise ConfigError(
            f"full configuration chain needs 2^{n} states; refusing N > {MAX_FULL_AGENTS}"
        )
    bits = _config_bits(n)
    n_a = bits.sum(axis=1)
    occ = np.where(bits == 1, n_a[:, None], n - n_a[:, None])
    p = profile.array()
    jump = p[occ - 1]  # (configs, agents)
    size = 2**n
    flips = _config_bits(n)  # every subset of agents that jumps
    entries = np.zeros((size, size))
    for x in range(size):
        q = jump[x]
        weights = np.prod(np.where(flips == 1, q, 1.0 - q), axis=1)
        entries[np.arange(size) ^ x, x] = weights
    return FullConfigMatrix(entries, n, profile)


def marginalize_to_agent(full: FullConfigMatrix, agent: int) -> np.ndarray:
    """Lump the full chain onto one agent's occupancy.

    Configurations sharing the agent's occupancy are weighted uniformly; by
    permutation and restaurant-swap symmetry they all lead to the same
    next-day occupancy law, which is what makes the N x N reduction exact.
    """
    n = full.n_agents
    if not (0 <= agent < n):
        raise ConfigError(f"agent index must lie in 0..{n - 1}, got {agent}")
    occ = full.occupancy(agent)
    onehot = np.zeros((2**n, n))
    onehot[np.arange(2**n), occ - 1] = 1.0
    # occupancy law tomorrow for each starting configuration: (n, configs)
    per_config = onehot.T @ full.entries
    counts = onehot.sum(axis=0)
    return per_config @ onehot / counts[None, :]


# -- symmetric / antisymmetric blocks ----------------------------------------


@dataclass(frozen=True)
class BlockDecomposition:
    symmetric_block: np.ndarray
    antisymmetric_block: np.ndarray
    basis: np.ndarray
    off_block: float

    def reassemble(self) -> np.ndarray:
        """Undo the change of basis; reproduces the original matrix."""
        m1 = self.symmetric_block.shape[0]
        n = self.basis.shape[0]
        blocks = np.zeros((n, n))
        blocks[:m1, :m1] = self.symmetric_block
        blocks[m1:, m1:] = self.antisymmetric_block
        # rows of ``basis`` are the left vectors s_1..s_M, e_N, a_1..a_M
        return np.linalg.solve(self.basis, blocks @ self.basis)


def symmetry_basis(n: int) -> np.ndarray:
    """Rows ``s_i = e_i + e_{N-i}``, then ``e_N``, then ``a_i = (N-i) e_i - i e_{N-i}``."""
    m = (n - 1) // 2
    rows = []
    for i in range(1, m + 1):
        v = np.zeros(n)
        v[i - 1] = v[n - i - 1] = 1.0
        rows.append(v)
    v = np.zeros(n)
    v[n - 1] = 1.0
    rows.append(v)
    for i in range(1, m + 1):
        v = np.zeros(n)
        v[i - 1] = n - i
        v[n - i - 1] = -i
        rows.append(v)
    return np.array(rows)


def block_diagonalize(T: np.ndarray, config: GameConfig | None = None, tol: float = 1e-12) -> BlockDecomposition:
    """Change to the s/a basis acting on row vectors; blocks of size M+1 and M.

    The s and a vectors span subspaces that are invariant under right
    multiplication (``v -> v @ T``), so ``S T S^-1`` is block diagonal when the
    rows of ``S`` are the basis vectors.
    """
    n = T.shape[0]
    m = (n - 1) // 2
    S = symmetry_basis(n)
    B = S @ T @ np.linalg.inv(S)
    off = max(np.abs(B[: m + 1, m + 1 :]).max(), np.abs(B[m + 1 :, : m + 1]).max())
    if off > tol:
        raise BlockStructureError(float(off), tol)
    return BlockDecomposition(B[: m + 1, : m + 1].copy(), B[m + 1 :, m + 1 :].copy(), S, float(off))


# -- steady state -----------------------------------------------------------


@dataclass(frozen=True)
class SteadyState:
    """Long-run occupancy law reached from a coin-toss initial condition.

    ``irreducible`` is False when the support graph has more than one strongly
    connected component; ``closed_classes`` then lists (1-based) the recurrent
    classes, and ``distribution`` mixes their stationary laws by absorption
    probability from that start. Each agent initially picks a restaurant by a
    fair coin, so the marked agent starts in ``C_i`` with probability
    ``binom(N-1, i-1) / 2^(N-1)``.
    """

    distribution: np.ndarray
    irreducible: bool
    closed_classes: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def unique(self) -> bool:
        return len(self.closed_classes) == 1


def _stationary_on(T: np.ndarray) -> np.ndarray:
    n = T.shape[0]
    A = np.vstack([T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.abs(A @ pi - rhs).max() > 1e-9:
        pi = np.full(n, 1.0 / n)
        for _ in range(100_000):
            nxt = T @ pi
            if np.abs(nxt - pi).max() < 1e-15:
                break
            pi = 0.5 * (pi + nxt)  # lazy chain: same fixed point, no periodicity
        pi = nxt
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def coin_toss_start(n: int) -> np.ndarray:
    """Occupancy law of the marked agent when everyone tosses a fair coin."""
    return np.array([math.comb(n - 1, i) for i in range(n)], dtype=float) / 2.0 ** (n - 1)


def steady_state(T: np.ndarray, threshold: float = 0.0) -> SteadyState:
    """Stationary distribution of a column-stochastic ``T``."""
    n = T.shape[0]
    adj = (T.T > threshold).astype(int)  # edge j -> k when T[k, j] > 0
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    if n_comp == 1:
        return SteadyState(_stationary_on(T), True, (tuple(range(1, n + 1)),))

    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        outside = np.setdiff1d(np.arange(n), members)
        if outside.size == 0 or not (T[np.ix_(outside, members)] > threshold).any():
            closed.append(members)
    recurrent = np.concatenate(closed)
    transient = np.setdiff1d(np.arange(n), recurrent)

    start = coin_toss_start(n)
    if transient.size:
        Q = T[np.ix_(transient, transient)]
        # expected visits to transient states
        visits = np.linalg.solve(np.eye(transient.size) - Q, start[transient])
        inflow = T[:, transient] @ visits
    else:
        inflow = np.zeros(n)
    dist = np.zeros(n)
    for members in closed:
        mass = start[members].sum() + inflow[members].sum()
        sub = T[np.ix_(members, members)]
        dist[members] = mass * _stationary_on(sub)
    dist /= dist.sum()
    classes = tuple(tuple(int(i) + 1 for i in members) for members in closed)
    return SteadyState(dist, False, classes)


def occupancy_ratio_defect(pi: np.ndarray) -> float:
    """``max_i |pi_i / i - pi_{N-i} / (N-i)|``; vanishes for every valid steady state."""
    n = pi.size
    return max(abs(pi[i - 1] / i - pi[n - i - 1] / (n - i)) for i in range(1, n))


def eigen3_analytic(p2: float) -> tuple[float, float, float]:
    """Eigenvalues of the N = 3 matrix with ``p_1 = 0``, ``p_3 = 1/2``."""
    if not (0.0 <= p2 <= 1.0):
        raise ConfigError(f"p2 must be a probability, got {p2}")
    q2 = 1.0 - p2
    return (1.0, (1.0 - 4.0 * p2 * p2) / 4.0, q2 * (q2 - p2))


def matrix_to_columns(T: np.ndarray) -> list[list[float]]:
    """JSON-friendly array-of-columns form."""
    return [[float(x) for x in T[:, j]] for j in range(T.shape[1])]


def enumerate_column(profile: StrategyProfile, j: int) -> np.ndarray:
    """Column ``j`` of T by brute force over the other agents' 2^(N-1) jump outcomes."""
    n = profile.n_agents
    pj = profile.p(j)
    po = profile.p(n - j) if j < n else 0.0
    col = np.zeros(n)
    others = [pj] * (j - 1) + [po] * (n - j)
    for me in (0, 1):
        w_me = pj if me else 1.0 - pj
        for outcome in itertools.product((0, 1), repeat=n - 1):
            w = w_me
            together = 1
            for idx, jumped in enumerate(outcome):
                q = others[idx]
                w *= q if jumped else 1.0 - q
                companion = idx < j - 1
                # same side tomorrow iff (companion and same action) or (opponent and opposite action)
                if companion == (jumped == me):
                    together += 1
            col[together - 1] += w
    return col
