"""Single risky asset Double-Mean-Variance (DMV) investor.

The investor splits wealth between the market portfolio (weight ``w``) and
the risk-free asset and maximizes

    w*mu_M + (1-w)*mu_f - gamma/2 * w^2 sigma2_M + b*(w*mu_g - theta/2 * w^2 sigma2_g)

``mu_M`` is the expected market return, so ``mu_M - mu_f`` is the market
premium. Type I investors ignore ESG (``b`` treated as 0), type N investors
ignore ESG-score uncertainty (``theta`` treated as 0), type U use everything.
Weights are not clamped.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigError, DegenerateDenominator, ZeroVariance

DEFAULT_B_GRID = (0.2, 0.6, 1.0, 1.4, 1.8)
DEFAULT_GAMMA = 2.0
DEFAULT_THETA = 1.0


class InvestorType(str, enum.Enum):
    I = "I"  # noqa: E741
    N = "N"
    U = "U"


@dataclass(frozen=True)
class MarketParams:
    mu_f: float
    mu_M: float
    sigma2_M: float
    mu_g: float
    sigma2_g: float

    def __post_init__(self):
        if not self.sigma2_M > 0.0:
            raise ConfigError(f"sigma2_M must be > 0, got {self.sigma2_M}")
        if not self.sigma2_g >= 0.0:
            raise ConfigError(f"sigma2_g must be >= 0, got {self.sigma2_g}")

    @property
    def premium(self) -> float:
        return self.mu_M - self.mu_f


@dataclass(frozen=True)
class InvestorProfile:
    kind: InvestorType
    gamma: float = DEFAULT_GAMMA
    theta: float = DEFAULT_THETA
    b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", InvestorType(self.kind))
        if not self.gamma > 0.0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if not self.theta >= 0.0:
            raise ConfigError(f"theta must be >= 0, got {self.theta}")
        if not self.b > 0.0:
            raise ConfigError(f"b must be > 0, got {self.b}")

    @property
    def effective_b(self) -> float:
        return 0.0 if self.kind is InvestorType.I else self.b

    @property
    def effective_theta(self) -> float:
        return 0.0 if self.kind is InvestorType.N else self.theta


@dataclass(frozen=True)
class DmvSolution:
    w: float
    term_benchmark: float
    term_esg_return: float
    term_esg_uncertainty: float
    excess_return: float
    variance: float
    sharpe: float


def dmv_objective(w: float, m: MarketParams, p: InvestorProfile) -> float:
    b, theta = p.effective_b, p.effective_theta
    financial = w * m.mu_M + (1.0 - w) * m.mu_f - 0.5 * p.gamma * w * w * m.sigma2_M
    esg = w * m.mu_g - 0.5 * theta * w * w * m.sigma2_g
    return financial + b * esg


def first_order_residual(w: float, m: MarketParams, p: InvestorProfile) -> float:
    b, theta = p.effective_b, p.effective_theta
    return m.premium - p.gamma * w * m.sigma2_M + b * (m.mu_g - theta * w * m.sigma2_g)


def decompose_weight(m: MarketParams, p: InvestorProfile) -> tuple[float, float, float]:
    """The benchmark, ESG-return and ESG-uncertainty terms; ``w = t1 + t2 - t3``."""
    b, theta = p.effective_b, p.effective_theta
    g = p.gamma * m.sigma2_M
    u = b * theta * m.sigma2_g
    t1 = m.premium / g
    t2 = b * m.mu_g / g
    t3 = (m.premium + b * m.mu_g) / g * (u / (g + u))
    return t1, t2, t3


def dmv_optimal_weight(m: MarketParams, p: InvestorProfile) -> DmvSolution:
    b, theta = p.effective_b, p.effective_theta
    denom = p.gamma * m.sigma2_M + b * theta * m.sigma2_g
    if not denom > 0.0:
        raise DegenerateDenominator(f"gamma*sigma2_M + b*theta*sigma2_g = {denom}")
    w = (m.premium + b * m.mu_g) / denom
    t1, t2, t3 = decompose_weight(m, p)
    excess = w * m.premium
    var = w * w * m.sigma2_M
    sharpe = excess / math.sqrt(var) if var > 0.0 else math.nan
    return DmvSolution(w, t1, t2, t3, excess, var, sharpe)


def type_weights(m: MarketParams, gamma: float, b: float, theta: float) -> tuple[float, float, float]:
    """Optimal market weights ``(w_I, w_N, w_U)`` for the three investor types."""
    ws = tuple(
        dmv_optimal_weight(m, InvestorProfile(k, gamma=gamma, theta=theta, b=b)).w
        for k in InvestorType
    )
    return ws  # type: ignore[return-value]


def type_premiums(m: MarketParams, gamma: float, b: float, theta: float) -> tuple[float, float, float]:
    """Market premia ``mu^T - mu_f`` that make each type hold exactly the market."""
    base = gamma * m.sigma2_M
    return base, base - b * m.mu_g, base + b * theta * m.sigma2_g - b * m.mu_g


def premium_gaps(m: MarketParams, gamma: float, b: float, theta: float) -> tuple[float, float, float]:
    """``(N - I, U - N, U - I)`` differences of the type premia."""
    return -b * m.mu_g, b * theta * m.sigma2_g, b * (theta * m.sigma2_g - m.mu_g)


def esg_risk_ratio(m: MarketParams, gamma: float, b: float, theta: float) -> float:
    """``(gamma sigma2_M)^2 / (gamma sigma2_M + b theta sigma2_g)^2``."""
    g = gamma * m.sigma2_M
    return g * g / (g + b * theta * m.sigma2_g) ** 2


def variance_gaps(m: MarketParams, gamma: float, b: float, theta: float) -> tuple[float, float, float, float]:
    """Closed-form portfolio-variance gaps ``(N - I, U - N, U - I, E_g)``.

    Each type holds ``w^T`` of the market, so its variance is ``(w^T)^2 sigma2_M``;
    :func:`type_variances` computes those directly.
    """
    p = m.premium
    g = gamma * m.sigma2_M
    u = b * theta * m.sigma2_g
    scale = gamma * gamma * m.sigma2_M
    e_g = esg_risk_ratio(m, gamma, b, theta)
    n_minus_i = (2.0 * p * b * m.mu_g + (b * m.mu_g) ** 2) / scale
    u_minus_n = -((p + b * m.mu_g) ** 2) / scale * ((2.0 * g * u + u * u) / (g + u) ** 2)
    u_minus_i = (p * p * (e_g - 1.0) + (2.0 * p * b * m.mu_g + (b * m.mu_g) ** 2) * e_g) / scale
    return n_minus_i, u_minus_n, u_minus_i, e_g


def type_variances(m: MarketParams, gamma: float, b: float, theta: float) -> tuple[float, float, float]:
    return tuple(w * w * m.sigma2_M for w in type_weights(m, gamma, b, theta))  # type: ignore[return-value]


def solution_sharpe(sol: DmvSolution) -> float:
    if sol.variance <= 0.0:
        raise ZeroVariance("portfolio variance is zero; Sharpe ratio undefined")
    return sol.sharpe


def certainty_equivalent_exp(mean: float, variance: float, risk_aversion: float, nodes: int = 64) -> float:
    """Exact certainty equivalent of a Gaussian prospect under CARA utility.

    Computed by Gauss-Hermite quadrature of ``E[-exp(-a X)]`` and inversion,
    independently of the closed form ``mean - a*variance/2``.
    """
    x, wts = np.polynomial.hermite_e.hermegauss(nodes)
    sd = math.sqrt(variance)
    a = risk_aversion
    expected = float(np.sum(wts * -np.exp(-a * (mean + sd * x)))) / math.sqrt(2.0 * math.pi)
    return -math.log(-expected) / a


def mean_variance_value(mean: float, variance: float, risk_aversion: float) -> float:
    return mean - 0.5 * risk_aversion * variance


@dataclass(frozen=True)
class GridRow:
    kind: InvestorType
    b: float
    gamma: float
    theta: float
    w: float
    term_benchmark: float
    term_esg_return: float
    term_esg_uncertainty: float
    premium: float
    variance: float
    sharpe: float

    FIELDS = (
        "type", "b", "gamma", "theta", "w", "term_benchmark", "term_esg_return",
        "term_esg_uncertainty", "premium", "variance", "sharpe",
    )

    def values(self) -> list:
        return [
            self.kind.value, self.b, self.gamma, self.theta, self.w, self.term_benchmark,
            self.term_esg_return, self.term_esg_uncertainty, self.premium, self.variance, self.sharpe,
        ]


def solve_grid(
    m: MarketParams,
    gamma: float = DEFAULT_GAMMA,
    theta: float = DEFAULT_THETA,
    b_grid: Iterable[float] = DEFAULT_B_GRID,
    kinds: Iterable[InvestorType | str] = tuple(InvestorType),
) -> list[GridRow]:
    """One row per (type, b) with the optimal weight, premium, variance and Sharpe."""
    rows = []
    kinds = [InvestorType(k) for k in kinds]
    for kind in kinds:
        for b in b_grid:
            p = InvestorProfile(kind, gamma=gamma, theta=theta, b=b)
            sol = dmv_optimal_weight(m, p)
            prem = type_premiums(m, gamma, b, theta)[list(InvestorType).index(kind)]
            rows.append(
                GridRow(kind, b, gamma, theta, sol.w, sol.term_benchmark, sol.term_esg_return,
                        sol.term_esg_uncertainty, prem, sol.variance, solution_sharpe(sol))
            )
    return rows
