"""Staggered-adoption estimators."""

from .group_time import Aggregate, Cell, GroupTimeATT, fit_group_time
from .regression import (
    PretrendTest,
    RegressionResult,
    RegressionSpec,
    average_within_id,
    event_dummies,
    event_term,
    fit_event_study,
    fit_interacted,
    fit_twfe,
    pretrend_test,
)
from .utils import WaldRatio, WeakFirstStageError, nearest_rank, wald_ratio, winsorize
from .within import Absorber, cluster_covariance

__all__ = [
    "Absorber",
    "Aggregate",
    "Cell",
    "GroupTimeATT",
    "PretrendTest",
    "RegressionResult",
    "RegressionSpec",
    "WaldRatio",
    "WeakFirstStageError",
    "average_within_id",
    "cluster_covariance",
    "event_dummies",
    "event_term",
    "fit_event_study",
    "fit_group_time",
    "fit_interacted",
    "fit_twfe",
    "nearest_rank",
    "pretrend_test",
    "wald_ratio",
    "winsorize",
]
