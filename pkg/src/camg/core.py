"""Game instances, strategy profiles and the pair-flip symmetry.

States are labelled 1..N: an agent in state ``C_i`` sits in a restaurant
holding ``i`` people including the agent. A strategy profile stores one jump
probability per state, ``p_i`` being the chance that an agent currently in
``C_i`` switches restaurants the next day.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


class ConfigError(ValueError):
    """Invalid game parameters or strategy profile."""


@dataclass(frozen=True)
class GameConfig:
    n_agents: int
    discount: float
    tol: float = 1e-10
    grid: int = 2001

    @property
    def m_half(self) -> int:
        return (self.n_agents - 1) // 2

    @property
    def w_max(self) -> float:
        return self.m_half / self.n_agents

    def with_discount(self, discount: float) -> "GameConfig":
        return make_config(self.n_agents, discount, self.tol, self.grid)


def make_config(n: int, discount: float, tol: float = 1e-10, grid: int = 2001) -> GameConfig:
    """Validate ``(N, lambda)`` and return a :class:`GameConfig`."""
    if int(n) != n:
        raise ConfigError(f"N must be an integer, got {n!r}")
    n = int(n)
    if n < 3:
        raise ConfigError(f"N must be >= 3, got {n}")
    if n % 2 == 0:
        raise ConfigError(f"N must be odd, got {n}")
    discount = float(discount)
    if not (0.0 <= discount < 1.0):
        raise ConfigError(f"discount must lie in [0, 1), got {discount}")
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    if int(grid) != grid or grid < 2:
        raise ConfigError(f"grid must be an integer >= 2, got {grid}")
    return GameConfig(n, discount, float(tol), int(grid))


@dataclass(frozen=True)
class StrategyProfile:
    """Jump probabilities ``(p_1, ..., p_N)``; index with :meth:`p` (1-based)."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(x) for x in self.probs)
        if len(probs) < 3 or len(probs) % 2 == 0:
            raise ConfigError(f"profile length must be odd and >= 3, got {len(probs)}")
        for i, x in enumerate(probs, start=1):
            if not (0.0 <= x <= 1.0) or x != x:
                raise ConfigError(f"p_{i} = {x} is not a probability")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "StrategyProfile":
        return cls(tuple(values))

    @property
    def n_agents(self) -> int:
        return len(self.probs)

    def p(self, i: int) -> float:
        return self.probs[i - 1]

    def array(self) -> np.ndarray:
        return np.array(self.probs, dtype=float)

    def with_entries(self, entries: dict[int, float]) -> "StrategyProfile":
        values = list(self.probs)
        for i, val in entries.items():
            values[i - 1] = val
        return StrategyProfile(tuple(values))

    def check(self, config: GameConfig) -> None:
        if self.n_agents != config.n_agents:
            raise ConfigError(
                f"profile has {self.n_agents} entries but N = {config.n_agents}"
            )


def uniform_profile(config: GameConfig) -> StrategyProfile:
    """Every agent picks a restaurant by a fair coin each day."""
    return StrategyProfile((0.5,) * config.n_agents)


def flip_pair(profile: StrategyProfile, j: int) -> StrategyProfile:
    """Replace ``p_j`` and ``p_{N-j}`` by their complements.

    Complementing the jump decision of every agent in a configuration yields
    the same partition of agents with the restaurant labels swapped, so the
    flipped profile generates exactly the same agent-centric dynamics.
    """
    n = profile.n_agents
    if not (1 <= j <= n - 1):
        raise ConfigError(f"pair index must lie in 1..{n - 1}, got {j}")
    k = n - j
    return profile.with_entries({j: 1.0 - profile.p(j), k: 1.0 - profile.p(k)})


def canonicalize(profile: StrategyProfile) -> StrategyProfile:
    """Pick the orbit member with ``p_j <= p_{N-j}`` for every ``j <= M``.

    This is the win-stay lose-shift representative: the minority side of a
    split jumps no more than the majority side. Ties leave the pair alone.
    """
    m = (profile.n_agents - 1) // 2
    out = profile
    for j in range(1, m + 1):
        if out.p(j) > out.p(profile.n_agents - j):
            out = flip_pair(out, j)
    return out


def minority_mask(n: int) -> np.ndarray:
    """Row vector with ones on the winning states ``C_1..C_M``."""
    mask = np.zeros(n)
    mask[: (n - 1) // 2] = 1.0
    return mask
