"""Episodic multi-asset trading environment.

State is cash balance, share holdings, current bars and two momentum
indicators (MACD and RSI). Actions are signed trade fractions in ``[-k, k]``
per asset:

* ``a_j < 0`` sells ``|a_j|`` of the current holding of asset ``j``
  (more than 100% is clipped to full liquidation);
* ``a_j > 0`` spends ``a_j`` of the cash available after all sells
  (buy fractions summing above one are scaled down).

Trades execute at the current close with a proportional cost, and holdings
are then marked to the next close. Fractional shares are allowed; shorting
and negative cash are not.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, InvalidBar, SeriesTooShort, WeightsOffSimplex

MACD_FAST = 12
MACD_SLOW = 26
RSI_PERIOD = 14


# ---------------------------------------------------------------- indicators


def ema(x: np.ndarray, span: int) -> np.ndarray:
    """Recursive EMA with ``alpha = 2/(span+1)``, seeded with the first value."""
    x = np.asarray(x, dtype=float)
    a = 2.0 / (span + 1.0)
    out = np.empty_like(x)
    out[0] = x[0]
    for t in range(1, x.size):
        # increment form keeps a constant series exactly constant
        out[t] = out[t - 1] + a * (x[t] - out[t - 1])
    return out


def macd(closes: Sequence[float], fast: int = MACD_FAST, slow: int = MACD_SLOW) -> tuple[np.ndarray, np.ndarray]:
    """``EMA(fast) - EMA(slow)`` and a mask that is True once ``slow`` bars have been seen."""
    x = np.asarray(closes, dtype=float)
    if x.size < slow:
        raise SeriesTooShort(f"MACD needs at least {slow} observations, got {x.size}")
    line = ema(x, fast) - ema(x, slow)
    warm = np.arange(x.size) >= slow - 1
    return line, warm


def rsi(closes: Sequence[float], period: int = RSI_PERIOD) -> np.ndarray:
    """Wilder RSI; the first ``period`` entries are NaN (warm-up).

    A window with no losses reads 100, with no gains 0, and a completely flat
    window 50.
    """
    x = np.asarray(closes, dtype=float)
    if x.size < period + 1:
        raise SeriesTooShort(f"RSI needs at least {period + 1} observations, got {x.size}")
    d = np.diff(x)
    gain = np.clip(d, 0.0, None)
    loss = np.clip(-d, 0.0, None)
    out = np.full(x.size, np.nan)
    g = gain[:period].mean()
    l = loss[:period].mean()  # noqa: E741
    out[period] = _rsi_value(g, l)
    for t in range(period, d.size):
        g = (g * (period - 1) + gain[t]) / period
        l = (l * (period - 1) + loss[t]) / period  # noqa: E741
        out[t + 1] = _rsi_value(g, l)
    return out


def _rsi_value(g: float, l: float) -> float:  # noqa: E741
    if l == 0.0:
        return 50.0 if g == 0.0 else 100.0
    return 100.0 - 100.0 / (1.0 + g / l)


# ---------------------------------------------------------------- bars


@dataclass(frozen=True)
class OhlcvBar:
    timestamp: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        validate_bar(self.open, self.high, self.low, self.close, self.volume)


def validate_bar(o: float, h: float, l: float, c: float, v: float) -> None:  # noqa: E741
    if min(o, h, l, c) <= 0.0 or not np.isfinite([o, h, l, c, v]).all():
        raise InvalidBar(f"prices must be positive and finite: {(o, h, l, c)}")
    if v < 0.0:
        raise InvalidBar(f"negative volume {v}")
    if not (l <= min(o, c) and max(o, c) <= h):
        raise InvalidBar(f"bar violates low <= open,close <= high: {(o, h, l, c)}")


@dataclass
class PriceSeries:
    """Columnar OHLCV series for one asset."""

    symbol: str
    dates: np.ndarray  # datetime64[D]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        for name in ("open", "high", "low", "close", "volume"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise DataError(f"{self.symbol}: column {name} has wrong length")
            setattr(self, name, arr)
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        if n > 1 and not (np.diff(self.dates) > np.timedelta64(0, "D")).all():
            raise DataError(f"{self.symbol}: dates must be strictly increasing")
        bad = (
            (np.minimum.reduce([self.open, self.high, self.low, self.close]) <= 0.0)
            | (self.volume < 0.0)
            | (self.low > np.minimum(self.open, self.close))
            | (self.high < np.maximum(self.open, self.close))
        )
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InvalidBar(f"{self.symbol}: invalid bar on {self.dates[i]}")

    def __len__(self) -> int:
        return len(self.dates)

    def bar(self, i: int) -> OhlcvBar:
        return OhlcvBar(
            self.dates[i].astype(dt.date), self.open[i], self.high[i], self.low[i], self.close[i], self.volume[i]
        )

    def slice(self, mask: np.ndarray) -> "PriceSeries":
        return PriceSeries(
            self.symbol, self.dates[mask], self.open[mask], self.high[mask],
            self.low[mask], self.close[mask], self.volume[mask],
        )


PRICE_HEADER = ("date", "open", "high", "low", "close", "volume")


def read_price_csv(path: str | Path, symbol: str | None = None) -> PriceSeries:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or tuple(c.strip().lower() for c in rows[0]) != PRICE_HEADER:
        raise DataError(f"{path}: header must be {','.join(PRICE_HEADER)}")
    try:
        dates = np.array([r[0].strip() for r in rows[1:]], dtype="datetime64[D]")
        vals = np.array([[float(c) for c in r[1:6]] for r in rows[1:]], dtype=float).reshape(-1, 5)
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: {exc}") from None
    return PriceSeries(symbol or path.stem, dates, *vals.T)


def write_price_csv(series: PriceSeries, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRICE_HEADER)
        for i in range(len(series)):
            w.writerow([
                str(series.dates[i]), repr(float(series.open[i])), repr(float(series.high[i])),
                repr(float(series.low[i])), repr(float(series.close[i])), repr(float(series.volume[i])),
            ])


# ---------------------------------------------------------------- accounting


@dataclass(frozen=True)
class EnvState:
    balance: float
    shares: np.ndarray
    closes: np.ndarray
    t: int = 0
    macd: np.ndarray | None = None
    rsi: np.ndarray | None = None
    clipped: bool = False

    @property
    def value(self) -> float:
        return float(self.balance + self.shares @ self.closes)

    def weights(self) -> np.ndarray:
        """Current allocation, assets then cash."""
        v = self.value
        return np.append(self.shares * self.closes, self.balance) / v


def check_action(action: Sequence[float], n: int, k: float) -> np.ndarray:
    a = np.asarray(action, dtype=float)
    if a.shape != (n,):
        raise ConfigError(f"action must have {n} components")
    if not np.isfinite(a).all() or (np.abs(a) > k + 1e-12).any():
        raise ConfigError(f"action components must lie in [-{k}, {k}]")
    return a


def trade(state: EnvState, action: np.ndarray, cost: float = 0.0) -> EnvState:
    """Execute ``action`` at the state's closes; returns the post-trade state."""
    a = np.asarray(action, dtype=float)
    px = state.closes
    shares = state.shares.copy()
    cash = state.balance
    clipped = False

    sell = np.clip(-a, 0.0, None)
    if (sell > 1.0).any():
        clipped = True
        sell = np.minimum(sell, 1.0)
    q = sell * shares
    cash += float(np.sum(q * px)) * (1.0 - cost)
    shares = shares - q
    shares[sell == 1.0] = 0.0

    buy = np.clip(a, 0.0, None)
    total = buy.sum()
    if total > 1.0:
        clipped = True
        buy = buy / total
    spend = buy * cash
    shares = shares + spend / (px * (1.0 + cost))
    cash = cash - float(spend.sum())
    if cash < 0.0:
        cash = 0.0
    return replace(state, balance=cash, shares=shares, clipped=clipped)


def step(
    state: EnvState,
    action: Sequence[float],
    next_closes: Sequence[float] | Sequence[OhlcvBar],
    cost: float = 0.0,
    k: float = 1.0,
) -> tuple[EnvState, float]:
    """Trade at the current close, then mark to ``next_closes``.

    Returns the new state and the simple portfolio return net of costs.
    """
    nxt = _closes(next_closes)
    if nxt.shape != state.closes.shape:
        raise InvalidBar("next bar count does not match asset count")
    if (nxt <= 0.0).any() or not np.isfinite(nxt).all():
        raise InvalidBar("next close prices must be positive")
    a = check_action(action, state.closes.size, k)
    v0 = state.value
    traded = trade(state, a, cost)
    new = replace(traded, closes=nxt, t=state.t + 1)
    return new, new.value / v0 - 1.0


def _closes(bars) -> np.ndarray:
    items = list(bars) if not isinstance(bars, np.ndarray) else bars
    if len(items) and isinstance(items[0], OhlcvBar):
        return np.array([b.close for b in items], dtype=float)
    return np.asarray(items, dtype=float)


def target_action(state: EnvState, target: Sequence[float]) -> np.ndarray:
    """Action that moves a frictionless state to ``target`` (assets then cash)."""
    target = np.asarray(target, dtype=float)
    n = state.closes.size
    v = state.value
    cur = state.shares * state.closes
    want = target[:n] * v
    a = np.zeros(n)
    over = cur > want
    a[over] = -(1.0 - want[over] / cur[over])
    cash_after = state.balance + float(np.sum(cur[over] - want[over]))
    under = ~over & (want > cur)
    if cash_after > 0.0:
        a[under] = (want[under] - cur[under]) / cash_after
    s = a[a > 0].sum()
    if s > 1.0:
        a[a > 0] /= s
    return a


class TradingEnv:
    """One episode over aligned price series. Single-owner mutable state."""

    def __init__(
        self,
        series: Sequence[PriceSeries],
        initial_cash: float = 1_000_000.0,
        cost: float = 0.0,
        k: float = 1.0,
    ):
        if not series:
            raise DataError("environment needs at least one asset")
        dates = series[0].dates
        for s in series[1:]:
            if len(s) != len(dates) or not (s.dates == dates).all():
                raise DataError("price series must share the same dates")
        if cost < 0.0:
            raise ConfigError("transaction cost must be >= 0")
        self.series = list(series)
        self.closes = np.column_stack([s.close for s in series])
        self.initial_cash = initial_cash
        self.cost = cost
        self.k = k
        n_bars = len(dates)
        self._macd = np.full(self.closes.shape, np.nan)
        self._rsi = np.full(self.closes.shape, np.nan)
        for j in range(len(series)):
            if n_bars >= MACD_SLOW:
                line, warm = macd(self.closes[:, j])
                self._macd[warm, j] = line[warm]
            if n_bars >= RSI_PERIOD + 1:
                self._rsi[:, j] = rsi(self.closes[:, j])
        self.state: EnvState | None = None

    @property
    def n_assets(self) -> int:
        return self.closes.shape[1]

    @property
    def n_bars(self) -> int:
        return self.closes.shape[0]

    def _with_indicators(self, s: EnvState) -> EnvState:
        return replace(s, macd=self._macd[s.t], rsi=self._rsi[s.t])

    def reset(self, t0: int = 0) -> EnvState:
        self.state = self._with_indicators(
            EnvState(self.initial_cash, np.zeros(self.n_assets), self.closes[t0].copy(), t0)
        )
        return self.state

    @property
    def done(self) -> bool:
        return self.state is None or self.state.t >= self.n_bars - 1

    def step(self, action: Sequence[float]) -> tuple[EnvState, float]:
        if self.state is None:
            raise RuntimeError("call reset() first")
        if self.done:
            raise RuntimeError("episode finished")
        new, r = step(self.state, action, self.closes[self.state.t + 1], self.cost, self.k)
        self.state = self._with_indicators(new)
        return self.state, r


def hold_portfolio(
    closes: np.ndarray,
    target: Sequence[float],
    cost: float = 0.0,
    rebalance: bool = False,
    initial_cash: float = 1.0,
) -> np.ndarray:
    """Per-bar returns of a portfolio entered at ``closes[0]`` and held (or rebalanced).

    ``target`` is the allocation over assets then cash. With ``rebalance`` the
    target is restored at every close.
    """
    closes = np.atleast_2d(np.asarray(closes, dtype=float))
    state = EnvState(initial_cash, np.zeros(closes.shape[1]), closes[0].copy())
    rets = np.empty(closes.shape[0] - 1)
    for t in range(1, closes.shape[0]):
        if t == 1 or rebalance:
            a = target_action(state, target)
        else:
            a = np.zeros(closes.shape[1])
        state, rets[t - 1] = step(state, a, closes[t], cost)
    return rets


# ---------------------------------------------------------------- rewards


class RewardKind(str, enum.Enum):
    LINEAR_ESG = "linear_esg"
    DMV_I = "dmv_I"
    DMV_N = "dmv_N"
    DMV_U = "dmv_U"


@dataclass(frozen=True)
class RewardSpec:
    """Reward definition.

    ``esg_scores`` are standardized per-asset scores. ``esg_cov`` is the ESG
    score covariance used by the type U penalty (zeros when omitted).
    """

    kind: RewardKind
    esg_scores: np.ndarray
    alpha_r: float = 1.0
    gamma: float = 2.0
    b: float = 1.0
    theta: float = 1.0
    esg_cov: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RewardKind(self.kind))
        object.__setattr__(self, "esg_scores", np.asarray(self.esg_scores, dtype=float))
        if self.alpha_r < 0.0:
            raise ConfigError("alpha_r must be >= 0")
        if self.gamma <= 0.0 or self.theta < 0.0 or self.b < 0.0:
            raise ConfigError("reward needs gamma > 0, theta >= 0, b >= 0")
        if self.esg_cov is not None:
            object.__setattr__(self, "esg_cov", np.asarray(self.esg_cov, dtype=float))

    @property
    def uses_cash(self) -> bool:
        return self.kind is not RewardKind.LINEAR_ESG


@dataclass(frozen=True)
class ReturnMoments:
    """Per-period moments of the risky assets plus the risk-free rate."""

    mean: np.ndarray
    cov: np.ndarray
    rf: float = 0.0


def _split_weights(weights: Sequence[float], n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape not in ((n,), (n + 1,)):
        raise WeightsOffSimplex(f"weights must have {n} or {n + 1} components")
    if (w < -1e-9).any() or abs(w.sum() - 1.0) > 1e-9:
        raise WeightsOffSimplex(f"weights must be nonnegative and sum to 1 (sum={w.sum()!r})")
    return w[:n]


def reward(spec: RewardSpec, weights: Sequence[float], moments: ReturnMoments) -> float:
    """Static reward of an allocation.

    ``weights`` is on the simplex over the ``n`` assets, optionally followed by
    a cash weight. ``LINEAR_ESG`` is ``sum w_i r_i + alpha_r * sum w_i ESG_i``
    on standardized inputs. The DMV kinds use the risky sleeve ``w`` with
    ``w'mu + (1 - sum w) rf - gamma/2 w'Cw`` plus
    ``b (w'ESG - theta/2 w'C_g w)``: type I drops the ESG term and type N its
    uncertainty penalty.
    """
    n = spec.esg_scores.size
    w = _split_weights(weights, n)
    mu = np.asarray(moments.mean, dtype=float)
    if spec.kind is RewardKind.LINEAR_ESG:
        return float(w @ mu + spec.alpha_r * (w @ spec.esg_scores))
    cov = np.asarray(moments.cov, dtype=float)
    fin = float(w @ mu + (1.0 - w.sum()) * moments.rf - 0.5 * spec.gamma * (w @ cov @ w))
    if spec.kind is RewardKind.DMV_I:
        return fin
    esg = float(w @ spec.esg_scores)
    if spec.kind is RewardKind.DMV_U and spec.esg_cov is not None:
        esg -= 0.5 * spec.theta * float(w @ spec.esg_cov @ w)
    return fin + spec.b * esg


def batch_reward(spec: RewardSpec, weights: np.ndarray, moments: ReturnMoments) -> np.ndarray:
    """Vectorized :func:`reward` over rows of ``weights`` (no simplex check)."""
    n = spec.esg_scores.size
    W = np.atleast_2d(np.asarray(weights, dtype=float))[:, :n]
    mu = np.asarray(moments.mean, dtype=float)
    if spec.kind is RewardKind.LINEAR_ESG:
        return W @ mu + spec.alpha_r * (W @ spec.esg_scores)
    cov = np.asarray(moments.cov, dtype=float)
    fin = W @ mu + (1.0 - W.sum(axis=1)) * moments.rf - 0.5 * spec.gamma * np.einsum("ij,jk,ik->i", W, cov, W)
    if spec.kind is RewardKind.DMV_I:
        return fin
    esg = W @ spec.esg_scores
    if spec.kind is RewardKind.DMV_U and spec.esg_cov is not None:
        esg = esg - 0.5 * spec.theta * np.einsum("ij,jk,ik->i", W, spec.esg_cov, W)
    return fin + spec.b * esg


# ---------------------------------------------------------------- MDP contract


@dataclass
class FiniteMDP:
    """Tabular MDP: ``P[a, s, s']`` transition probabilities, ``R[a, s, s']`` rewards."""

    P: np.ndarray
    R: np.ndarray
    discount: float = 0.9
    names: list[str] = field(default_factory=list)

    def expected_reward(self) -> np.ndarray:
        return np.einsum("asn,asn->as", self.P, self.R)


def value_iteration(mdp: FiniteMDP, tol: float = 0.0, max_iter: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Iterate ``V(s) = max_a sum_s' P (R + discount V(s'))`` to a fixed point.

    With ``tol=0`` iteration stops only when an update leaves ``V`` unchanged
    in floating point (or the value sequence cycles at the last ulp).
    """
    r = mdp.expected_reward()
    V = np.zeros(r.shape[1])
    seen: set[bytes] = set()
    for _ in range(max_iter):
        Q = r + mdp.discount * np.einsum("asn,n->as", mdp.P, V)
        V_new = Q.max(axis=0)
        if np.max(np.abs(V_new - V)) <= tol:
            V = V_new
            break
        key = V_new.tobytes()
        if key in seen:
            V = V_new
            break
        seen.add(key)
        V = V_new
    Q = r + mdp.discount * np.einsum("asn,n->as", mdp.P, V)
    return V, Q.argmax(axis=0)


def policy_value(mdp: FiniteMDP, policy: Sequence[int]) -> np.ndarray:
    """Exact value of a deterministic stationary policy by a linear solve."""
    s_idx = np.arange(len(policy))
    P = mdp.P[policy, s_idx]
    r = mdp.expected_reward()[policy, s_idx]
    return np.linalg.solve(np.eye(len(policy)) - mdp.discount * P, r)


def three_state_market_mdp(discount: float = 0.9) -> FiniteMDP:
    """Toy bull/flat/bear market with actions sell/hold/buy."""
    # actions: 0 sell, 1 hold, 2 buy; states: 0 bear, 1 flat, 2 bull
    P = np.array([
        [[0.7, 0.2, 0.1], [0.3, 0.5, 0.2], [0.2, 0.3, 0.5]],
        [[0.6, 0.3, 0.1], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6]],
        [[0.5, 0.3, 0.2], [0.1, 0.6, 0.3], [0.1, 0.2, 0.7]],
    ])
    state_payoff = np.array([-1.0, 0.1, 1.0])
    exposure = np.array([0.0, 0.5, 1.0])
    cost = np.array([0.05, 0.0, 0.05])
    R = exposure[:, None, None] * state_payoff[None, None, :] - cost[:, None, None] + np.zeros((3, 3, 3))
    return FiniteMDP(P, R, discount, ["bear", "flat", "bull"])
