"""Survival extrapolation anchored on projected external-population mortality.

Polyhazard survival models are fitted jointly to disease and external
population data with gradient-based MCMC; long-term behavior is anchored via
Bayesian Lee-Carter mortality projections; extrapolated curves feed mean
survival, restricted mean survival, and life-years-gained estimands.
"""

__version__ = "0.1.0"

from .data import (
    DigitizedCurve,
    KaplanMeierCurve,
    SurvivalDataset,
    SurvivalRecord,
    empirical_hazard,
    kaplan_meier,
    load_survival_csv,
    reconstruct_ipd,
)
from .estimands import (
    EstimandResult,
    life_years_gained,
    mean_survival,
    restricted_mean_survival,
    trapezoid_integral,
)
from .extrapolate import (
    ExtrapolatedCurve,
    build_cause_specific_disease_curve,
    derive_hr_arm,
    extrapolate_baseline,
    extrapolate_constant_difference,
    extrapolate_constant_ratio,
    extrapolate_pseudo_cause_specific,
    make_grid,
)
from .hazards import (
    ChangePointSchedule,
    ComponentParams,
    Family,
    PolyComponent,
    PolyhazardSpec,
    Role,
    changepoint_cumulative_hazard,
    changepoint_hazard,
    changepoint_survival,
    component_cumulative_hazard,
    component_hazard,
    component_survival,
    poly_cumulative_hazard,
    poly_hazard,
    poly_log_survival,
    poly_survival,
)
from .inference import (
    FitReport,
    PosteriorSamples,
    SamplerConfig,
    diagnostics,
    fit,
    information_criteria,
    sample,
)
from .model import (
    ComponentDecl,
    GroupDecl,
    JointModel,
    JointModelSpec,
    Prior,
    PriorSpec,
    free_components,
    log_likelihood_cause_specific,
    log_likelihood_disease,
    log_likelihood_population,
    log_posterior_and_gradient,
    log_prior,
)
from .mortality import (
    LeeCarterPosterior,
    MortalitySurface,
    ProjectedRates,
    cohort_survival,
    fit_lee_carter,
    load_mortality_csv,
    project_rates,
    synthesize_cohort,
)
