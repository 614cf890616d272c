"""Rolling-window comparison of ESG sources and reward specifications.

For each window the policy is fitted on the training span only and then held
(static weights, entered at the last training close) through the test span.
Returns are standardized with the pooled mean and sd of the training-span
daily returns, which keeps the linear reward and the DMV rewards on the same
scale as the standardized ESG scores.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from dateutil.relativedelta import relativedelta

from .capm import AssetUniverse
from .dmv import InvestorProfile, InvestorType
from .ensemble import EnsembleSpec, ensemble
from .errors import ConfigError, DataError, EsgDmvError, RangeTooShort, ZeroVariance
from .market_env import PriceSeries, ReturnMoments, RewardKind, RewardSpec, batch_reward, hold_portfolio, reward
from .policy import PolicyParams, SearchConfig, closed_form_policy, cross_entropy_search
from .ratings import EsgPanel, cross_rater_variance, standardize

log = logging.getLogger(__name__)

PERIODS_PER_YEAR = 252
RIDGE = 1e-10


# ---------------------------------------------------------------- schedule


_DURATION = re.compile(r"^\s*(\d+)\s*([ymwd])\s*$", re.IGNORECASE)


def parse_duration(token: str | relativedelta) -> relativedelta:
    """``"3y"``, ``"12m"``, ``"2w"`` or ``"30d"``."""
    if isinstance(token, relativedelta):
        return token
    m = _DURATION.match(str(token))
    if not m:
        raise ConfigError(f"bad duration {token!r} (expected e.g. 3y, 12m, 30d)")
    k, unit = int(m.group(1)), m.group(2).lower()
    return {
        "y": relativedelta(years=k),
        "m": relativedelta(months=k),
        "w": relativedelta(weeks=k),
        "d": relativedelta(days=k),
    }[unit]


def _as_date(x) -> dt.date:
    if isinstance(x, dt.datetime):
        return x.date()
    if isinstance(x, dt.date):
        return x
    if isinstance(x, np.datetime64):
        return x.astype("datetime64[D]").astype(dt.date)
    return dt.date.fromisoformat(str(x))


@dataclass(frozen=True)
class WindowSpec:
    index: int
    train_start: dt.date
    train_end: dt.date
    test_start: dt.date
    test_end: dt.date

    def __post_init__(self):
        if not (self.train_start <= self.train_end < self.test_start <= self.test_end):
            raise ConfigError(f"window {self.index} is not chronological")

    @property
    def label(self) -> str:
        return f"P{self.index + 1:02d}"


def rolling_schedule(range_start, range_end, train_len="3y", test_len="1y", stride="1y") -> list[WindowSpec]:
    """Windows ``[start + k*stride, +train_len]`` followed by a test span of ``test_len``.

    The test span starts the day after the training span ends. Windows are
    generated while the test end stays within ``range_end``.
    """
    start, end = _as_date(range_start), _as_date(range_end)
    train, test, step = parse_duration(train_len), parse_duration(test_len), parse_duration(stride)
    if start + step <= start:
        raise ConfigError("stride must be positive")
    windows = []
    k = 0
    while True:
        ts = start + k * step
        tr_end = ts + train
        te_end = tr_end + test
        if te_end > end:
            break
        windows.append(WindowSpec(k, ts, tr_end, tr_end + dt.timedelta(days=1), te_end))
        k += 1
    if not windows:
        raise RangeTooShort(f"{start}..{end} is shorter than one train+test window")
    return windows


# ---------------------------------------------------------------- metrics


def sharpe(returns: Sequence[float], rf: float = 0.0, periods_per_year: int = PERIODS_PER_YEAR) -> float:
    """Annualized Sharpe ratio of per-period returns with sample sd."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise ZeroVariance("need at least 2 observations")
    ex = r - rf
    sd = ex.std(ddof=1)
    if sd == 0.0 or sd <= 1e-15 * max(1.0, np.abs(ex).max()):
        raise ZeroVariance("returns have zero variance")
    return float(ex.mean() / sd * math.sqrt(periods_per_year))


# ---------------------------------------------------------------- strategies


@dataclass(frozen=True)
class Strategy:
    """One comparison arm: an ESG source, a reward and an optimizer.

    ``esg_source`` is a rater name or an :class:`EnsembleSpec`.
    """

    name: str
    esg_source: str | EnsembleSpec
    reward_kind: RewardKind = RewardKind.LINEAR_ESG
    alpha_r: float = 1.0
    gamma: float = 2.0
    b: float = 1.0
    theta: float = 1.0
    optimizer: str = "closed-form"
    search: SearchConfig = SearchConfig()

    def __post_init__(self):
        object.__setattr__(self, "reward_kind", RewardKind(self.reward_kind))
        if self.optimizer not in ("closed-form", "cem"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class BacktestSettings:
    rf: float = 0.0
    periods_per_year: int = PERIODS_PER_YEAR
    cost: float = 0.0
    rebalance: bool = False
    seed: int = 0


@dataclass
class ResultRow:
    window: str
    strategy: str
    cum_return: float
    sharpe: float
    terminal_value: float
    test_reward: float
    weights: np.ndarray
    rank: int = 0


@dataclass
class BacktestReport:
    windows: list[WindowSpec]
    strategies: list[str]
    rows: list[ResultRow] = field(default_factory=list)

    def ranks(self) -> dict[str, list[int]]:
        out = {s: [] for s in self.strategies}
        for r in self.rows:
            out[r.strategy].append(r.rank)
        return out

    def write(self, out_dir: str | Path, assets: Sequence[str] = ()) -> list[Path]:
        out_dir = Path(out_dir)
        paths = [out_dir / "report.csv", out_dir / "ranks.csv"]
        with open(paths[0], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window", "strategy", "return", "sharpe", "rank", "terminal_value", "test_reward"])
            for r in self.rows:
                w.writerow([r.window, r.strategy, _fmt(r.cum_return), _fmt(r.sharpe), r.rank,
                            _fmt(r.terminal_value), _fmt(r.test_reward)])
        with open(paths[1], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window", *self.strategies])
            by = {(r.window, r.strategy): r.rank for r in self.rows}
            for win in self.windows:
                w.writerow([win.label, *(by[(win.label, s)] for s in self.strategies)])
        if assets:
            paths.append(out_dir / "weights.csv")
            with open(paths[2], "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["window", "strategy", *assets, "cash"])
                for r in self.rows:
                    wts = list(r.weights) + [0.0] * (len(assets) + 1 - len(r.weights))
                    w.writerow([r.window, r.strategy, *(_fmt(x) for x in wts)])
        return paths


def _fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def read_report_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def rank_window(rows: list[ResultRow]) -> None:
    """Rank by Sharpe (1 = best); NaN ranks last; ties by strategy name."""
    def key(r: ResultRow):
        s = r.sharpe
        return (1, 0.0, r.strategy) if math.isnan(s) else (0, -s, r.strategy)

    for i, r in enumerate(sorted(rows, key=key)):
        r.rank = i + 1


def substream_seed(seed: int, *names) -> int:
    """Independent 63-bit seed for a (window, strategy, ...) task."""
    keys = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for n in names:
        keys.append(n if isinstance(n, int) else zlib.crc32(str(n).encode()))
    return int(np.random.SeedSequence(keys).generate_state(2, np.uint64)[0] >> np.uint64(1))


# ---------------------------------------------------------------- estimation


def esg_feature(panel: EsgPanel, source: str | EnsembleSpec, assets: Sequence[str]) -> np.ndarray:
    """Per-asset ESG score from a rater column or an ensemble, z-scored across ``assets``."""
    if isinstance(source, EnsembleSpec):
        res = ensemble(panel, source)
        lookup = dict(zip(res.firms, res.scores))
    else:
        if source not in panel.raters:
            raise ConfigError(f"unknown rater {source!r}")
        lookup = dict(zip(panel.firms, panel.column(source)))
    try:
        x = np.array([lookup[a] for a in assets], dtype=float)
    except KeyError as exc:
        raise DataError(f"no ESG score for asset {exc.args[0]!r} from source {source!r}") from None
    if np.isnan(x).any():
        raise DataError(f"missing ESG score for an asset from source {source!r}")
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    if sd == 0.0:
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def esg_uncertainty(panel: EsgPanel, assets: Sequence[str]) -> np.ndarray:
    """Diagonal ESG covariance from the per-firm cross-rater variance of z-scores."""
    var = dict(zip(panel.firms, cross_rater_variance(standardize(panel))))
    v = np.array([var.get(a, np.nan) for a in assets])
    return np.diag(np.nan_to_num(v, nan=0.0))


@dataclass(frozen=True)
class WindowData:
    train_closes: np.ndarray
    test_closes: np.ndarray
    moments: ReturnMoments  # standardized
    raw_mean: float
    raw_sd: float


def split_window(closes: np.ndarray, dates: np.ndarray, win: WindowSpec, rf: float) -> WindowData:
    d = dates.astype("datetime64[D]")
    tr = (d >= np.datetime64(win.train_start)) & (d <= np.datetime64(win.train_end))
    te = (d >= np.datetime64(win.test_start)) & (d <= np.datetime64(win.test_end))
    if tr.sum() < 3 or te.sum() < 2:
        raise DataError(f"window {win.label}: not enough bars (train {tr.sum()}, test {te.sum()})")
    train = closes[tr]
    last_train = np.flatnonzero(tr)[-1]
    test = np.vstack([closes[last_train], closes[te]])
    r = train[1:] / train[:-1] - 1.0
    m, s = float(r.mean()), float(r.std(ddof=1))
    if s == 0.0:
        raise DataError(f"window {win.label}: flat training prices")
    z = (r - m) / s
    cov = np.atleast_2d(np.cov(z, rowvar=False, ddof=1))
    moments = ReturnMoments(z.mean(axis=0), cov, (rf - m) / s)
    return WindowData(train, test, moments, m, s)


def evaluation_moments(wd: WindowData, rf: float) -> ReturnMoments:
    r = wd.test_closes[1:] / wd.test_closes[:-1] - 1.0
    z = (r - wd.raw_mean) / wd.raw_sd
    cov = np.atleast_2d(np.cov(z, rowvar=False, ddof=1)) if z.shape[0] > 1 else np.zeros((z.shape[1],) * 2)
    return ReturnMoments(z.mean(axis=0), cov, (rf - wd.raw_mean) / wd.raw_sd)


# ---------------------------------------------------------------- fitting


def make_reward_spec(s: Strategy, esg: np.ndarray, esg_cov: np.ndarray) -> RewardSpec:
    return RewardSpec(s.reward_kind, esg, alpha_r=s.alpha_r, gamma=s.gamma, b=s.b, theta=s.theta, esg_cov=esg_cov)


def fit_policy(spec: RewardSpec, moments: ReturnMoments, optimizer: str, search: SearchConfig) -> PolicyParams:
    n = spec.esg_scores.size
    if optimizer == "cem":
        dim = n + 1 if spec.uses_cash else n
        p = cross_entropy_search(lambda W: batch_reward(spec, W, moments), dim, search, vectorized=True)
        w = p.weights if spec.uses_cash else np.append(p.weights, 0.0)
        return PolicyParams(w)
    if spec.kind is RewardKind.LINEAR_ESG:
        # linear objective on the simplex: the best vertex is optimal
        score = moments.mean + spec.alpha_r * spec.esg_scores
        w = np.zeros(n + 1)
        w[int(np.argmax(score))] = 1.0
        return PolicyParams(w)
    kind = {RewardKind.DMV_I: InvestorType.I, RewardKind.DMV_N: InvestorType.N, RewardKind.DMV_U: InvestorType.U}[spec.kind]
    esg_cov = spec.esg_cov if spec.esg_cov is not None else np.zeros((n, n))
    cov = moments.cov + RIDGE * np.eye(n)
    u = AssetUniverse(moments.mean - moments.rf, cov, spec.esg_scores, esg_cov)
    if spec.b == 0.0:
        kind = InvestorType.I
    profile = InvestorProfile(kind, gamma=spec.gamma, theta=spec.theta, b=spec.b or 1.0)
    return closed_form_policy(u, profile)


def _window_task(
    win: WindowSpec,
    closes: np.ndarray,
    dates: np.ndarray,
    panel: EsgPanel,
    assets: Sequence[str],
    strategies: Sequence[Strategy],
    settings: BacktestSettings,
    esg_cov: np.ndarray,
    features: dict,
) -> list[ResultRow]:
    wd = split_window(closes, dates, win, settings.rf)
    tm = evaluation_moments(wd, settings.rf)
    rows = []
    for s in strategies:
        spec = make_reward_spec(s, features[s.name], esg_cov)
        search = SearchConfig(
            population=s.search.population, elite_fraction=s.search.elite_fraction,
            iterations=s.search.iterations, initial_sd=s.search.initial_sd,
            seed=substream_seed(settings.seed, win.index, s.name),
        )
        policy = fit_policy(spec, wd.moments, s.optimizer, search)
        rets = hold_portfolio(wd.test_closes, policy.weights, settings.cost, settings.rebalance)
        try:
            sr = sharpe(rets, settings.rf, settings.periods_per_year)
        except ZeroVariance:
            sr = math.nan
        w_for_reward = policy.weights if spec.uses_cash else policy.weights[:-1] / max(policy.weights[:-1].sum(), 1e-300)
        rows.append(ResultRow(
            window=win.label,
            strategy=s.name,
            cum_return=float(np.prod(1.0 + rets) - 1.0),
            sharpe=sr,
            terminal_value=float(np.prod(1.0 + rets)),
            test_reward=reward(spec, w_for_reward, tm),
            weights=policy.weights,
        ))
    rank_window(rows)
    return rows


def align_prices(series: Sequence[PriceSeries]) -> tuple[np.ndarray, np.ndarray]:
    dates = series[0].dates
    for s in series[1:]:
        if len(s) != len(dates) or not (s.dates == dates).all():
            raise DataError("all price series must share the same dates")
    return np.column_stack([s.close for s in series]), dates


def run_comparison(
    prices: Sequence[PriceSeries],
    panel: EsgPanel,
    strategies: Sequence[Strategy],
    schedule: Sequence[WindowSpec],
    settings: BacktestSettings = BacktestSettings(),
) -> BacktestReport:
    """Fit and evaluate every strategy on every window; ranks are per window."""
    names = [s.name for s in strategies]
    if len(set(names)) != len(names):
        raise ConfigError("strategy names must be unique")
    assets = [p.symbol for p in prices]
    closes, dates = align_prices(prices)
    esg_cov = esg_uncertainty(panel, assets)
    features = {s.name: esg_feature(panel, s.esg_source, assets) for s in strategies}
    report = BacktestReport(list(schedule), names)
    for win in schedule:
        try:
            report.rows.extend(_window_task(win, closes, dates, panel, assets, strategies, settings, esg_cov, features))
        except EsgDmvError as exc:
            raise type(exc)(f"window {win.label}: {exc}") from exc
    return report


def default_strategies(
    raters: Sequence[str],
    reward_kind: RewardKind = RewardKind.LINEAR_ESG,
    optimizer: str = "closed-form",
    search: SearchConfig = SearchConfig(),
    **params,
) -> list[Strategy]:
    """One strategy per rater plus the four ensembles."""
    from .ensemble import EnsembleMethod

    out = [Strategy(r, r, reward_kind, optimizer=optimizer, search=search, **params) for r in raters]
    for m in EnsembleMethod:
        spec = EnsembleSpec(m)
        out.append(Strategy(spec.name, spec, reward_kind, optimizer=optimizer, search=search, **params))
    return out


def rank_one_counts(report: BacktestReport) -> dict[str, int]:
    return {s: sum(1 for r in ranks if r == 1) for s, ranks in report.ranks().items()}


def rank_instability(report: BacktestReport, candidates: Sequence[str] | None = None) -> bool:
    """True when no candidate strategy is ranked first in every window."""
    counts = rank_one_counts(report)
    n = len(report.windows)
    cands = candidates or report.strategies
    return all(counts[c] < n for c in cands)
