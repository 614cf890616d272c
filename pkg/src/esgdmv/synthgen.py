"""Seeded synthetic rater panels and price paths."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, NotRepairablePSD
from .market_env import PriceSeries
from .ratings import EsgPanel

# Pearson correlations of the four raters (RobecoSAM, Sustainalytics, MSCI, Asset4)
TABLE1_RATERS = ("RobecoSAM", "SA", "MSCI", "Asset4")
TABLE1_CORR = np.array([
    [1.0000, -0.1591, 0.4153, 0.5041],
    [-0.1591, 1.0000, -0.3387, 0.1826],
    [0.4153, -0.3387, 1.0000, 0.3139],
    [0.5041, 0.1826, 0.3139, 1.0000],
])

MAX_REPAIR_SHIFT = 0.2


class Marginal(str, enum.Enum):
    UNIFORM = "uniform"
    TRUNCNORM = "truncnorm"


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_firms: int = 30
    n_assets: int = 8
    n_bars: int = 3915  # business days from 2007-06-29 to 2022-06-30
    rater_corr_target: np.ndarray = field(default_factory=lambda: TABLE1_CORR.copy())
    raters: tuple[str, ...] = TABLE1_RATERS
    return_mean: np.ndarray | None = None
    return_cov: np.ndarray | None = None
    esg_marginal: Marginal = Marginal.UNIFORM
    esg_mean: float = 50.0
    esg_sd: float = 20.0
    start_date: str = "2007-06-29"
    initial_price: float = 100.0
    intrabar_scale: float = 0.5
    asset_prefix: str = "F"

    def __post_init__(self):
        c = np.asarray(self.rater_corr_target, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ConfigError("rater_corr_target must be square")
        if not np.allclose(c, c.T) or not np.allclose(np.diag(c), 1.0) or (np.abs(c) > 1.0).any():
            raise ConfigError("rater_corr_target must be symmetric with unit diagonal and entries in [-1, 1]")
        if len(self.raters) != c.shape[0]:
            raise ConfigError("rater names do not match the correlation target")
        object.__setattr__(self, "rater_corr_target", c)
        object.__setattr__(self, "esg_marginal", Marginal(self.esg_marginal))
        mean = np.zeros(self.n_assets) if self.return_mean is None else np.asarray(self.return_mean, dtype=float)
        cov = default_return_cov(self.n_assets) if self.return_cov is None else np.asarray(self.return_cov, dtype=float)
        if mean.shape != (self.n_assets,) or cov.shape != (self.n_assets, self.n_assets):
            raise ConfigError("return_mean/return_cov do not match n_assets")
        if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() < -1e-12:
            raise ConfigError("return_cov must be symmetric PSD")
        object.__setattr__(self, "return_mean", mean)
        object.__setattr__(self, "return_cov", cov)
        if self.n_firms < 1 or self.n_assets < 1 or self.n_bars < 1:
            raise ConfigError("n_firms, n_assets and n_bars must be positive")

    def asset_names(self) -> list[str]:
        return [f"{self.asset_prefix}{i + 1:02d}" for i in range(self.n_assets)]


def default_return_cov(n: int, vol: float = 0.015, rho: float = 0.3) -> np.ndarray:
    """Equicorrelated daily log-return covariance."""
    c = np.full((n, n), rho) + (1.0 - rho) * np.eye(n)
    return vol * vol * c


def repair_correlation(c: np.ndarray, floor: float = 0.0) -> tuple[np.ndarray, float]:
    """Eigenvalue-clipping repair with unit diagonal restored.

    Returns ``(repaired, max_abs_shift)``. Raises :class:`NotRepairablePSD`
    when any entry moves by more than 0.2.
    """
    c = 0.5 * (np.asarray(c, dtype=float) + np.asarray(c, dtype=float).T)
    vals, vecs = np.linalg.eigh(c)
    if vals.min() >= floor:
        return c.copy(), 0.0
    clipped = (vecs * np.maximum(vals, floor)) @ vecs.T
    d = np.sqrt(np.clip(np.diag(clipped), np.finfo(float).tiny, None))
    fixed = clipped / np.outer(d, d)
    np.fill_diagonal(fixed, 1.0)
    fixed = 0.5 * (fixed + fixed.T)
    shift = float(np.abs(fixed - c).max())
    if shift > MAX_REPAIR_SHIFT:
        raise NotRepairablePSD(f"PSD repair moves an entry by {shift:.3f} (> {MAX_REPAIR_SHIFT})")
    return fixed, shift


def latent_correlation_for_uniform(target: np.ndarray) -> np.ndarray:
    """Gaussian-copula correlation whose uniform marginals have Pearson ``target``."""
    lat = 2.0 * np.sin(np.pi * np.asarray(target, dtype=float) / 6.0)
    np.fill_diagonal(lat, 1.0)
    return lat


def _marginal_ppf(u: np.ndarray, cfg: SynthConfig) -> np.ndarray:
    if cfg.esg_marginal is Marginal.UNIFORM:
        return 100.0 * u
    a = (0.0 - cfg.esg_mean) / cfg.esg_sd
    b = (100.0 - cfg.esg_mean) / cfg.esg_sd
    return stats.truncnorm.ppf(u, a, b, loc=cfg.esg_mean, scale=cfg.esg_sd)


def copula_correlation(cfg: SynthConfig) -> tuple[np.ndarray, float]:
    """Latent Gaussian correlation used for the panel and the PSD-repair shift applied to it."""
    target = cfg.rater_corr_target
    latent = latent_correlation_for_uniform(target) if cfg.esg_marginal is Marginal.UNIFORM else target
    return repair_correlation(latent)


def gen_esg_panel(cfg: SynthConfig, firms: list[str] | None = None) -> EsgPanel:
    """Gaussian-copula rater panel mapped through the configured marginal onto [0, 100]."""
    latent, _ = copula_correlation(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    k = latent.shape[0]
    vals, vecs = np.linalg.eigh(latent)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    z = rng.standard_normal((cfg.n_firms, k)) @ root.T
    u = stats.norm.cdf(z)
    scores = np.clip(_marginal_ppf(u, cfg), 0.0, 100.0)
    firms = firms or [f"{cfg.asset_prefix}{i + 1:02d}" for i in range(cfg.n_firms)]
    return EsgPanel(tuple(firms), tuple(cfg.raters), scores)


def gen_prices(cfg: SynthConfig) -> list[PriceSeries]:
    """Geometric price paths with Gaussian log-returns and synthetic OHLC around closes."""
    rng = np.random.default_rng([cfg.seed, 2])
    n, T = cfg.n_assets, cfg.n_bars
    vals, vecs = np.linalg.eigh(cfg.return_cov)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    logret = cfg.return_mean + rng.standard_normal((T, n)) @ root.T
    close = cfg.initial_price * np.exp(np.cumsum(logret, axis=0))
    prev = np.vstack([np.full((1, n), cfg.initial_price), close[:-1]])
    open_ = prev
    vol = np.sqrt(np.clip(np.diag(cfg.return_cov), 0.0, None))
    wick_hi = np.exp(cfg.intrabar_scale * vol * np.abs(rng.standard_normal((T, n))))
    wick_lo = np.exp(-cfg.intrabar_scale * vol * np.abs(rng.standard_normal((T, n))))
    high = np.maximum(open_, close) * wick_hi
    low = np.minimum(open_, close) * wick_lo
    volume = np.exp(rng.normal(math.log(1e6), 0.5, size=(T, n)))
    dates = business_days(cfg.start_date, T)
    return [
        PriceSeries(name, dates, open_[:, j], high[:, j], low[:, j], close[:, j], volume[:, j])
        for j, name in enumerate(cfg.asset_names())
    ]


def business_days(start: str, count: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(count), roll="forward")
