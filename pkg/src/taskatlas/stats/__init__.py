"""Statistical procedures behind the reported results: correlations, LOESS with
bootstrap bands, variance decomposition, OLS and two-way fixed effects with
clustered errors, regression forests, exact TreeSHAP, permutation importance,
1-D accumulated local effects, and dominance-analysis Shapley R^2."""

from .series import Series, StatsError
from .correlation import CorrResult, LeaveOneOutResult, leave_one_out, partial_correlation, pearson, spearman
from .smooth import Band, LoessFit, bootstrap_band, loess
from .regression import FeResult, OlsResult, fe_regression, ols
from .decompose import DominanceResult, VarianceShares, shapley_r2, variance_decomposition
from .forest import Forest, ForestParams, Tree, fit_forest, permutation_importance
from .treeshap import AttributionResult, mean_abs_shap, tree_shap
from .ale import AleResult, ale_1d

__all__ = [
    "AleResult",
    "AttributionResult",
    "Band",
    "CorrResult",
    "DominanceResult",
    "FeResult",
    "Forest",
    "ForestParams",
    "LeaveOneOutResult",
    "LoessFit",
    "OlsResult",
    "Series",
    "StatsError",
    "Tree",
    "VarianceShares",
    "ale_1d",
    "bootstrap_band",
    "fe_regression",
    "fit_forest",
    "leave_one_out",
    "loess",
    "mean_abs_shap",
    "ols",
    "partial_correlation",
    "pearson",
    "permutation_importance",
    "shapley_r2",
    "spearman",
    "tree_shap",
    "variance_decomposition",
]
