"""Household eldercare labor-supply model, staggered-event panel simulator and
difference-in-differences estimators."""

from . import dynamic_program, estimators, io, model_core, panel_sim
from .dynamic_program import (
    DynamicParams,
    DynamicState,
    HealthTransition,
    default_dynamic_params,
    dynamic_return_to_work,
    simulate_health_path,
    solve_bellman,
)
from .estimators import (
    RegressionSpec,
    fit_event_study,
    fit_group_time,
    fit_interacted,
    fit_twfe,
    pretrend_test,
    wald_ratio,
    winsorize,
)
from .model_core import (
    CareUtility,
    HouseholdParams,
    InfeasibleChoiceError,
    ShockDistribution,
    WorkerType,
    classify_types,
    expected_maximum,
    gradient_sweep,
    income_effect_params,
    optimal_choice,
    return_to_work,
    work_probability,
)
from .panel_sim import DgpSpec, GroundTruth, generate_reduced_form, generate_structural

__version__ = "0.1.0"
