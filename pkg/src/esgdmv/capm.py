"""ESG-modified CAPM from a population of heterogeneous DMV agents.

Agent ``i`` with risk aversion ``gamma_i``, ESG taste ``b_i`` and ESG-uncertainty
aversion ``theta_i`` demands

    X_i = (gamma_i Sigma_M + b_i theta_i Sigma_gM)^-1 (mu_r + b_i mu_gM)

and the market portfolio is the wealth-weighted sum ``X_M = sum_i w_i X_i``
(not renormalized). Only linear solves are used, except for ``Gamma_MU``
whose definition is itself an inverse of a sum of inverses.

Without uncertainty the pricing relation is
``mu_r = beta*mu_M + b_M*(beta*mu_g - mu_gM)`` with ``beta = Sigma_M X_M / sigma2_M``.

With uncertainty the aggregate risk matrix ``Gamma_MU`` replaces
``gamma_M Sigma_M``. Beta is taken against that matrix,
``beta = Gamma_MU X_M / (X_M' Gamma_MU X_M)``, and

    alpha = beta * (X_M' B_MU mu_gM) - B_MU mu_gM

This reduces to ``B_MU (beta*mu_g - mu_gM)`` whenever ``B_MU`` is a multiple
of the identity (homogeneous tastes), and to the no-uncertainty CAPM when all
``theta_i`` are zero. The market-return beta ``Sigma_M X_M / sigma2_M`` is
reported alongside as ``beta_market``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, SingularSystem

RCOND_MIN = 1e-12
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class AssetUniverse:
    mu_r: np.ndarray
    Sigma_M: np.ndarray
    mu_gM: np.ndarray
    Sigma_gM: np.ndarray
    assets: tuple[str, ...] = ()

    def __post_init__(self):
        mu_r = np.atleast_1d(np.asarray(self.mu_r, dtype=float))
        mu_g = np.atleast_1d(np.asarray(self.mu_gM, dtype=float))
        S = np.atleast_2d(np.asarray(self.Sigma_M, dtype=float))
        Sg = np.atleast_2d(np.asarray(self.Sigma_gM, dtype=float))
        n = mu_r.size
        if mu_g.shape != (n,) or S.shape != (n, n) or Sg.shape != (n, n):
            raise DataError("inconsistent universe dimensions")
        if not (np.allclose(S, S.T, rtol=0, atol=1e-12) and np.allclose(Sg, Sg.T, rtol=0, atol=1e-12)):
            raise DataError("covariance matrices must be symmetric")
        if np.linalg.eigvalsh(S).min() <= 0.0:
            raise DataError("Sigma_M must be positive definite")
        if np.linalg.eigvalsh(Sg).min() < -1e-12 * max(1.0, np.abs(Sg).max()):
            raise DataError("Sigma_gM must be positive semidefinite")
        assets = tuple(self.assets) or tuple(f"A{i + 1}" for i in range(n))
        if len(assets) != n:
            raise DataError("asset labels do not match dimension")
        for name, val in (("mu_r", mu_r), ("mu_gM", mu_g), ("Sigma_M", S), ("Sigma_gM", Sg), ("assets", assets)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.mu_r.size


@dataclass(frozen=True)
class AgentPopulation:
    weights: np.ndarray
    gamma: np.ndarray
    b: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(getattr(self, k), dtype=float)) for k in ("weights", "gamma", "b", "theta")]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1 or arrs[0].size == 0:
            raise ConfigError("agent parameter vectors must be 1-d and of equal length")
        w, g, b, t = arrs
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError(f"agent weights must be >= 0 and sum to 1 (sum={w.sum()!r})")
        if (g <= 0).any():
            raise ConfigError("gamma_i must be > 0")
        if (b <= 0).any():
            raise ConfigError("b_i must be > 0")
        if (t < 0).any():
            raise ConfigError("theta_i must be >= 0")
        for k, a in zip(("weights", "gamma", "b", "theta"), arrs):
            object.__setattr__(self, k, a)

    @classmethod
    def homogeneous(cls, gamma: float, b: float, theta: float) -> "AgentPopulation":
        return cls(np.ones(1), np.array([gamma]), np.array([b]), np.array([theta]))

    def without_uncertainty(self) -> "AgentPopulation":
        return AgentPopulation(self.weights, self.gamma, self.b, np.zeros_like(self.theta))

    def __len__(self) -> int:
        return self.weights.size


@dataclass
class CapmResult:
    X_M: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    mu_M: float
    mu_g: float
    sigma2_M: float
    sigma2_g: float
    beta_market: np.ndarray
    b_M: float | None = None
    gamma_M: float | None = None
    Gamma_MU: np.ndarray | None = None
    B_MU: np.ndarray | None = None

    @property
    def X_M_normalized(self) -> np.ndarray:
        """Market weights rescaled to sum to one; for reporting only."""
        return self.X_M / self.X_M.sum()

    def reconstruct_mu_r(self) -> np.ndarray:
        return self.beta * self.mu_M + self.alpha


def checked_solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """``A^-1 rhs`` with a conditioning guard and a residual check."""
    A = np.asarray(A, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if 1.0 / np.linalg.cond(A) < RCOND_MIN:
        raise SingularSystem(f"system is numerically singular (rcond < {RCOND_MIN:g})")
    try:
        x = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    resid = np.linalg.norm(A @ x - rhs)
    if resid > RESIDUAL_TOL * max(np.linalg.norm(rhs), np.finfo(float).tiny):
        raise SingularSystem(f"solve residual {resid:.3g} too large")
    return x


def agent_demand(u: AssetUniverse, gamma: float, b: float, theta: float) -> np.ndarray:
    A = gamma * u.Sigma_M + b * theta * u.Sigma_gM
    return checked_solve(A, u.mu_r + b * u.mu_gM)


def aggregate_no_uncertainty(pop: AgentPopulation) -> tuple[float, float]:
    """Aggregate ``(gamma_M, b_M)``: harmonic risk aversion and risk-tolerance-weighted taste."""
    tol = float(np.sum(pop.weights / pop.gamma))
    gamma_M = 1.0 / tol
    b_M = float(np.sum(pop.weights * pop.b / pop.gamma)) * gamma_M
    return gamma_M, b_M


def _market_portfolio(u: AssetUniverse, pop: AgentPopulation) -> np.ndarray:
    X = np.zeros(u.n)
    for w, g, b, t in zip(pop.weights, pop.gamma, pop.b, pop.theta):
        X += w * agent_demand(u, g, b, t)
    return X


def _market_moments(u: AssetUniverse, X: np.ndarray) -> tuple[np.ndarray, float, float, float, float]:
    SX = u.Sigma_M @ X
    sigma2_M = float(X @ SX)
    if not sigma2_M > 0.0:
        raise SingularSystem("market portfolio has zero variance")
    return SX / sigma2_M, float(X @ u.mu_r), float(X @ u.mu_gM), sigma2_M, float(X @ u.Sigma_gM @ X)


def esg_alpha(beta: float | np.ndarray, market_esg: float, own_esg: float | np.ndarray, taste: float) -> float | np.ndarray:
    """``taste * (beta * market_esg - own_esg)``: the no-uncertainty alpha of one asset."""
    return taste * (np.asarray(beta) * market_esg - np.asarray(own_esg))


def capm_no_uncertainty(u: AssetUniverse, pop: AgentPopulation) -> CapmResult:
    pop0 = pop.without_uncertainty()
    X = _market_portfolio(u, pop0)
    beta, mu_M, mu_g, s2, s2g = _market_moments(u, X)
    gamma_M, b_M = aggregate_no_uncertainty(pop0)
    alpha = b_M * (beta * mu_g - u.mu_gM)
    return CapmResult(X, beta, alpha, mu_M, mu_g, s2, s2g, beta.copy(), b_M=b_M, gamma_M=gamma_M)


def _inverse_sums(u: AssetUniverse, pop: AgentPopulation) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(u.n)
    S = np.zeros((u.n, u.n))
    T = np.zeros((u.n, u.n))
    for w, g, b, t in zip(pop.weights, pop.gamma, pop.b, pop.theta):
        Ainv = checked_solve(g * u.Sigma_M + b * t * u.Sigma_gM, eye)
        S += w * Ainv
        T += w * b * Ainv
    return S, T


def aggregate_with_uncertainty(u: AssetUniverse, pop: AgentPopulation) -> tuple[np.ndarray, np.ndarray]:
    """``(Gamma_MU, B_MU)`` with ``Gamma_MU = (sum w_i A_i^-1)^-1`` and ``B_MU = Gamma_MU sum w_i b_i A_i^-1``."""
    S, T = _inverse_sums(u, pop)
    Gamma = checked_solve(S, np.eye(u.n))
    B = checked_solve(S, T)
    return 0.5 * (Gamma + Gamma.T), B


def capm_with_uncertainty(u: AssetUniverse, pop: AgentPopulation) -> CapmResult:
    X = _market_portfolio(u, pop)
    beta_mkt, mu_M, mu_g, s2, s2g = _market_moments(u, X)
    Gamma, B = aggregate_with_uncertainty(u, pop)
    S, _ = _inverse_sums(u, pop)
    GX = checked_solve(S, X)
    kappa = float(X @ GX)
    if not kappa > 0.0:
        raise SingularSystem("X_M' Gamma_MU X_M is not positive")
    beta = GX / kappa
    Bg = B @ u.mu_gM
    alpha = beta * float(X @ Bg) - Bg
    gamma_M, b_M = aggregate_no_uncertainty(pop)
    return CapmResult(
        X, beta, alpha, mu_M, mu_g, s2, s2g, beta_mkt,
        b_M=b_M, gamma_M=gamma_M, Gamma_MU=Gamma, B_MU=B,
    )


def universe_from_arrays(
    assets: Sequence[str], mu_r: Sequence[float], mu_gM: Sequence[float], Sigma_M: np.ndarray, Sigma_gM: np.ndarray
) -> AssetUniverse:
    return AssetUniverse(np.asarray(mu_r), np.asarray(Sigma_M), np.asarray(mu_gM), np.asarray(Sigma_gM), tuple(assets))
