"""Combine several raters' scores for a firm into one ensemble score.

Centroid, median and alpha-maxmin work row by row on the 0-100 scale. The
PCA ensemble projects standardized rows onto the first principal component
and reports z-units.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AlphaOutOfRange, ConfigError, DataError, DegenerateCovariance, IncompleteRow
from .ratings import EsgPanel, StandardizedPanel, standardize

DEFAULT_ALPHA = 0.5


class EnsembleMethod(str, enum.Enum):
    CENTROID = "centroid"
    MEDIAN = "median"
    PCA = "pca"
    ALPHA_MAXMIN = "alpha_maxmin"


@dataclass(frozen=True)
class EnsembleSpec:
    method: EnsembleMethod
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        object.__setattr__(self, "method", EnsembleMethod(self.method))
        _check_alpha(self.alpha)

    @property
    def name(self) -> str:
        if self.method is EnsembleMethod.ALPHA_MAXMIN:
            return f"alpha_maxmin({self.alpha:g})"
        return self.method.value


@dataclass
class EnsembleResult:
    firms: tuple[str, ...]
    scores: np.ndarray
    dropped: int = 0
    loadings: np.ndarray | None = None
    explained_variance_ratio: float | None = None
    raters: tuple[str, ...] = field(default=())


def _check_alpha(alpha: float) -> None:
    if not (0.0 <= alpha <= 1.0):
        raise AlphaOutOfRange(f"alpha must be in [0, 1], got {alpha}")


def _row(row: Sequence[float]) -> np.ndarray:
    x = np.asarray(row, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise IncompleteRow("row must be a non-empty vector")
    if np.isnan(x).any():
        raise IncompleteRow("row has missing scores")
    return x


def centroid(row: Sequence[float]) -> float:
    return float(_row(row).mean())


def median(row: Sequence[float]) -> float:
    return float(np.median(_row(row)))


def alpha_maxmin(row: Sequence[float], alpha: float = DEFAULT_ALPHA) -> float:
    """``alpha * worst + (1 - alpha) * best``: alpha=1 is pure pessimism."""
    _check_alpha(alpha)
    x = _row(row)
    return float(alpha * x.min() + (1.0 - alpha) * x.max())


def first_principal_component(cov: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Leading eigenvector of ``cov`` with the sign rule used by the PCA ensemble.

    Returns ``(loading, eigenvalue, explained_variance_ratio)``. The loading has
    unit norm and nonnegative sum; an exactly zero sum is resolved by making
    the first nonzero loading positive.
    """
    cov = np.asarray(cov, dtype=float)
    cov = 0.5 * (cov + cov.T)
    eigval, eigvec = np.linalg.eigh(cov)
    if np.all(eigval <= 0.0) or np.trace(cov) == 0.0:
        raise DegenerateCovariance("rater covariance matrix is rank 0")
    lam = float(eigval[-1])
    v = eigvec[:, -1]
    v = v / np.linalg.norm(v)
    s = v.sum()
    if s < 0.0:
        v = -v
    elif s == 0.0:
        nz = np.flatnonzero(v)
        if nz.size and v[nz[0]] < 0.0:
            v = -v
    return v, lam, lam / float(np.trace(cov))


def pca_ensemble(panel: StandardizedPanel) -> EnsembleResult:
    n_raters = len(panel.raters)
    if n_raters < 2:
        raise DataError("PCA ensemble needs at least 2 raters")
    ok = panel.complete_mask
    z = panel.values[ok]
    if z.shape[0] < n_raters + 1:
        raise DataError(
            f"PCA ensemble needs at least {n_raters + 1} complete firms, got {z.shape[0]}"
        )
    cov = np.cov(z, rowvar=False, ddof=1)
    v, _, ratio = first_principal_component(cov)
    firms = tuple(f for f, keep in zip(panel.firms, ok) if keep)
    return EnsembleResult(
        firms=firms,
        scores=z @ v,
        dropped=int((~ok).sum()),
        loadings=v,
        explained_variance_ratio=ratio,
        raters=panel.raters,
    )


def ensemble(panel: EsgPanel, spec: EnsembleSpec) -> EnsembleResult:
    """Apply ``spec`` to every complete firm; incomplete firms are dropped and counted."""
    if spec.method is EnsembleMethod.PCA:
        ok = panel.complete_mask
        sub = EsgPanel(
            tuple(f for f, keep in zip(panel.firms, ok) if keep), panel.raters, panel.scores[ok]
        )
        res = pca_ensemble(standardize(sub))
        res.dropped = int((~ok).sum())
        return res

    ok = panel.complete_mask
    x = panel.scores[ok]
    if spec.method is EnsembleMethod.CENTROID:
        scores = x.mean(axis=1)
    elif spec.method is EnsembleMethod.MEDIAN:
        scores = np.median(x, axis=1)
    else:
        scores = spec.alpha * x.min(axis=1) + (1.0 - spec.alpha) * x.max(axis=1)
    firms = tuple(f for f, keep in zip(panel.firms, ok) if keep)
    return EnsembleResult(firms=firms, scores=scores, dropped=int((~ok).sum()), raters=panel.raters)


def parse_spec(token: str) -> EnsembleSpec:
    """Parse ``centroid``, ``median``, ``pca``, ``alpha_maxmin`` or ``alpha_maxmin:0.3``."""
    name, _, arg = token.strip().partition(":")
    name = name.strip().lower().replace("-", "_")
    if name.startswith("alpha_maxmin(") and name.endswith(")"):
        name, arg = "alpha_maxmin", name[len("alpha_maxmin(") : -1]
    try:
        method = EnsembleMethod(name)
    except ValueError:
        raise ConfigError(f"unknown ensemble method {token!r}") from None
    if arg:
        return EnsembleSpec(method, float(arg))
    return EnsembleSpec(method)
