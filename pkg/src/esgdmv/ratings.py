"""Multi-rater ESG panels: scale harmonization, standardization, disagreement.

Scores live on a common 0-100 scale. Missing cells are ``NaN``; in CSV files
they are empty strings.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DegenerateColumn, InsufficientOverlap


class LetterGrade(enum.IntEnum):
    """MSCI-style seven-tier letter grade, worst to best."""

    CCC = 1
    B = 2
    BB = 3
    BBB = 4
    A = 5
    AA = 6
    AAA = 7

    @classmethod
    def parse(cls, token: str) -> "LetterGrade":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise DataError(f"not a letter grade: {token!r}") from None


def harmonize_msci(grade: LetterGrade | str) -> float:
    """Midpoint of the grade's interval among seven equal slices of [0, 100]."""
    if isinstance(grade, str):
        grade = LetterGrade.parse(grade)
    k = int(grade)
    return 100.0 * (2 * k - 1) / 14.0


@dataclass(frozen=True)
class EsgPanel:
    """Firms x raters score matrix; ``NaN`` marks a missing score."""

    firms: tuple[str, ...]
    raters: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        object.__setattr__(self, "firms", tuple(self.firms))
        object.__setattr__(self, "raters", tuple(self.raters))
        object.__setattr__(self, "scores", scores)
        if scores.shape != (len(self.firms), len(self.raters)):
            raise DataError(
                f"score matrix shape {scores.shape} does not match "
                f"{len(self.firms)} firms x {len(self.raters)} raters"
            )
        if len(set(self.firms)) != len(self.firms):
            raise DataError("duplicate firm identifiers")
        if len(set(self.raters)) != len(self.raters):
            raise DataError("duplicate rater identifiers")
        present = scores[~np.isnan(scores)]
        if present.size and (present.min() < 0.0 or present.max() > 100.0):
            raise DataError("scores must lie in [0, 100]")

    @property
    def complete_mask(self) -> np.ndarray:
        return ~np.isnan(self.scores).any(axis=1)

    def column(self, rater: str) -> np.ndarray:
        return self.scores[:, self.raters.index(rater)]

    def select_raters(self, raters: Sequence[str]) -> "EsgPanel":
        idx = [self.raters.index(r) for r in raters]
        return EsgPanel(self.firms, tuple(raters), self.scores[:, idx])


@dataclass(frozen=True)
class StandardizedPanel:
    """Same layout as :class:`EsgPanel` but holding per-rater z-scores."""

    firms: tuple[str, ...]
    raters: tuple[str, ...]
    values: np.ndarray

    @property
    def complete_mask(self) -> np.ndarray:
        return ~np.isnan(self.values).any(axis=1)


def _zscore_columns(values: np.ndarray, raters: Sequence[str]) -> np.ndarray:
    out = np.full_like(values, np.nan, dtype=float)
    for j, rater in enumerate(raters):
        col = values[:, j]
        present = ~np.isnan(col)
        x = col[present]
        if x.size < 2:
            raise DegenerateColumn(f"rater {rater!r} has fewer than 2 scores")
        sd = x.std(ddof=1)
        if sd == 0.0 or not np.isfinite(sd):
            raise DegenerateColumn(f"rater {rater!r} has constant scores")
        out[present, j] = (x - x.mean()) / sd
    return out


def standardize(panel: EsgPanel | StandardizedPanel) -> StandardizedPanel:
    """Per-rater z-scores with sample (n-1) standard deviation."""
    values = panel.scores if isinstance(panel, EsgPanel) else panel.values
    return StandardizedPanel(panel.firms, panel.raters, _zscore_columns(values, panel.raters))


def _values(panel: EsgPanel | StandardizedPanel) -> np.ndarray:
    return panel.scores if isinstance(panel, EsgPanel) else panel.values


def rater_correlation(panel: EsgPanel | StandardizedPanel) -> np.ndarray:
    """Pearson correlation between raters over pairwise-complete firms."""
    x = _values(panel)
    k = x.shape[1]
    corr = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            both = ~np.isnan(x[:, i]) & ~np.isnan(x[:, j])
            if both.sum() < 3:
                raise InsufficientOverlap(
                    f"raters {panel.raters[i]!r} and {panel.raters[j]!r} share "
                    f"{int(both.sum())} firms (need 3)"
                )
            a = x[both, i] - x[both, i].mean()
            b = x[both, j] - x[both, j].mean()
            denom = np.sqrt((a @ a) * (b @ b))
            if denom == 0.0:
                raise DegenerateColumn(
                    f"raters {panel.raters[i]!r}/{panel.raters[j]!r}: constant over overlap"
                )
            r = float(np.clip((a @ b) / denom, -1.0, 1.0))
            corr[i, j] = corr[j, i] = r
    return corr


def cross_rater_variance(panel: StandardizedPanel) -> np.ndarray:
    """Per-firm sample variance of standardized scores across raters.

    Used as the per-firm ESG uncertainty. Firms with a missing score get NaN.
    """
    v = panel.values
    out = np.full(v.shape[0], np.nan)
    ok = panel.complete_mask
    if v.shape[1] >= 2:
        out[ok] = v[ok].var(axis=1, ddof=1)
    return out


def _parse_cell(token: str) -> float:
    token = token.strip()
    if token == "":
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise DataError(f"cannot parse score {token!r}") from None


def _is_grade_column(tokens: list[str]) -> bool:
    present = [t.strip() for t in tokens if t.strip() != ""]
    if not present:
        return False
    return all(t.upper() in LetterGrade.__members__ for t in present)


def read_panel_csv(path: str | Path) -> EsgPanel:
    """Read ``firm,<rater1>,...``. Columns made only of letter grades are harmonized."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not header or header[0].strip().lower() != "firm" or len(header) < 2:
        raise DataError(f"{path}: header must be 'firm,<rater>,...'")
    raters = [h.strip() for h in header[1:]]
    for r in body:
        if len(r) != len(header):
            raise DataError(f"{path}: row {r[:1]} has {len(r)} cells, expected {len(header)}")
    firms = [r[0].strip() for r in body]
    scores = np.empty((len(body), len(raters)))
    for j in range(len(raters)):
        tokens = [r[j + 1] for r in body]
        if _is_grade_column(tokens):
            scores[:, j] = [harmonize_msci(t) if t.strip() else np.nan for t in tokens]
        else:
            scores[:, j] = [_parse_cell(t) for t in tokens]
    return EsgPanel(tuple(firms), tuple(raters), scores)


def format_float(x: float) -> str:
    if np.isnan(x):
        return ""
    return repr(float(x))


def write_panel_csv(panel: EsgPanel | StandardizedPanel, path: str | Path) -> None:
    values = _values(panel)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["firm", *panel.raters])
        for firm, row in zip(panel.firms, values):
            w.writerow([firm, *(format_float(x) for x in row)])


def write_matrix_csv(labels: Sequence[str], matrix: np.ndarray, path: str | Path, corner: str = "") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([corner, *labels])
        for label, row in zip(labels, matrix):
            w.writerow([label, *(format_float(x) for x in row)])


def read_matrix_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a labelled square matrix written by :func:`write_matrix_csv`."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty matrix file")
    labels = [c.strip() for c in rows[0][1:]]
    try:
        m = np.array([[_parse_cell(c) for c in r[1:]] for r in rows[1:]], dtype=float)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None
    if m.shape != (len(labels), len(labels)):
        raise DataError(f"{path}: matrix is {m.shape}, expected square of size {len(labels)}")
    return labels, m
