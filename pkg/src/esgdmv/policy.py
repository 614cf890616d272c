"""Static allocation policies: closed-form DMV demand and cross-entropy search.

Allocations are vectors on the simplex (assets first, cash last when present).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .capm import AssetUniverse, agent_demand
from .dmv import InvestorProfile
from .errors import ConfigError

log = logging.getLogger(__name__)


@dataclass
class PolicyParams:
    weights: np.ndarray
    events: list[str] = field(default_factory=list)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or (w < -1e-12).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ConfigError(f"policy weights must lie on the simplex: {w}")
        self.weights = w

    @property
    def risky(self) -> np.ndarray:
        return self.weights[:-1]

    @property
    def cash(self) -> float:
        return float(self.weights[-1])


@dataclass(frozen=True)
class SearchConfig:
    population: int = 64
    elite_fraction: float = 0.125
    iterations: int = 200
    initial_sd: float = 1.0
    seed: int = 0
    min_sd: float = 1e-4

    def __post_init__(self):
        if self.population < 1 or self.iterations < 1:
            raise ConfigError("population and iterations must be positive")
        if not 0.0 < self.elite_fraction < 1.0:
            raise ConfigError("elite_fraction must be in (0, 1)")
        if not self.initial_sd > 0.0:
            raise ConfigError("initial_sd must be > 0")

    @property
    def n_elite(self) -> int:
        return max(1, int(round(self.population * self.elite_fraction)))


def project_demand(x: np.ndarray) -> PolicyParams:
    """Clip negative demand, park the remainder in cash, renormalize if over-invested."""
    x = np.asarray(x, dtype=float)
    events = []
    if (x < 0.0).any():
        events.append(f"clipped {int((x < 0).sum())} negative weights")
        x = np.clip(x, 0.0, None)
    total = x.sum()
    if total > 1.0:
        events.append(f"renormalized risky weights from sum {total:.6g}")
        w = np.append(x / total, 0.0)
    else:
        w = np.append(x, 1.0 - total)
    return PolicyParams(w, events)


def closed_form_policy(u: AssetUniverse, profile: InvestorProfile) -> PolicyParams:
    """DMV agent demand for the window estimates, mapped to the simplex."""
    x = agent_demand(u, profile.gamma, profile.effective_b, profile.effective_theta)
    return project_demand(x)


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class SearchTrace:
    best_params: PolicyParams
    best_reward: float
    best_history: list[float]


def cross_entropy_search(
    episode_reward: Callable[[np.ndarray], float] | Callable[[np.ndarray], np.ndarray],
    dim: int,
    cfg: SearchConfig = SearchConfig(),
    vectorized: bool = False,
    trace: bool = False,
) -> PolicyParams | SearchTrace:
    """Cross-entropy search over the ``dim``-simplex.

    Candidates are Gaussian draws in logit space mapped through softmax; the
    mean and per-coordinate sd are refit to the elite fraction each iteration.
    The best allocation ever evaluated is returned (ties keep the earlier one).
    With ``vectorized`` the reward function receives a ``(population, dim)``
    array and returns one reward per row.
    """
    rng = np.random.default_rng(cfg.seed)
    mean = np.zeros(dim)
    sd = np.full(dim, cfg.initial_sd)
    best_w = None
    best_r = -np.inf
    history = []
    for it in range(cfg.iterations):
        z = mean + sd * rng.standard_normal((cfg.population, dim))
        W = softmax(z)
        if vectorized:
            r = np.asarray(episode_reward(W), dtype=float)
        else:
            r = np.array([float(episode_reward(w)) for w in W])
        r = np.where(np.isnan(r), -np.inf, r)
        i = int(np.argmax(r))
        if best_w is None or r[i] > best_r:
            best_w, best_r = W[i].copy(), float(r[i])
        history.append(best_r)
        # stable sort so equal rewards rank by sample index
        elite = z[np.argsort(-r, kind="stable")[: cfg.n_elite]]
        mean = elite.mean(axis=0)
        sd = np.maximum(elite.std(axis=0), cfg.min_sd)
    log.debug("cem finished: best reward %.6g after %d iterations", best_r, cfg.iterations)
    best_w = np.clip(best_w, 0.0, None)
    params = PolicyParams(best_w / best_w.sum())
    if trace:
        return SearchTrace(params, best_r, history)
    return params
