"""Portfolio construction under ESG-rating ambiguity.

Rater harmonization and ensembles, the Double-Mean-Variance investor, ESG
modified CAPMs, and a rolling-window backtest with a cross-entropy policy
search.
"""

__version__ = "0.1.0"

from .capm import AgentPopulation, AssetUniverse, CapmResult, capm_no_uncertainty, capm_with_uncertainty  # noqa: E402
from .dmv import InvestorProfile, InvestorType, MarketParams, dmv_optimal_weight  # noqa: E402
from .ensemble import EnsembleMethod, EnsembleSpec  # noqa: E402
from .ratings import EsgPanel, LetterGrade, harmonize_msci, rater_correlation, standardize  # noqa: E402

__all__ = [
    "AgentPopulation", "AssetUniverse", "CapmResult", "capm_no_uncertainty", "capm_with_uncertainty",
    "InvestorProfile", "InvestorType", "MarketParams", "dmv_optimal_weight",
    "EnsembleMethod", "EnsembleSpec",
    "EsgPanel", "LetterGrade", "harmonize_msci", "rater_correlation", "standardize",
]
