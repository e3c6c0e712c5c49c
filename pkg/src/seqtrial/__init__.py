"""Sequential clinical-trial design engine.

Computes frequentist and Bayesian group-sequential stopping boundaries,
calibrates design parameters to type I error targets, solves
decision-theoretic optimal stopping by backward induction, and estimates
operating characteristics (FDR, FPR, coverage) by seeded Monte Carlo.
"""

from .bayes import (
    GaussianPrior,
    MixturePrior,
    PosteriorSummary,
    mixture_posterior_prob,
    posterior,
    posterior_report,
    pp_boundary,
    ppos,
    ppos_boundary,
    two_arm_posterior,
)
from .calibrate import (
    InfeasibleTargetError,
    calibrate_loss,
    calibrate_ppos,
    calibrate_prior_sd,
    calibrate_threshold,
    pp_boundaries,
    ppos_boundaries,
    thresholds_from_boundaries,
)
from .decision import (
    AnalysisRisk,
    LossSpec,
    RiskTable,
    backward_induction,
    expected_loss_curves,
    subjective_threshold,
    terminal_risk,
)
from .engine import (
    BoundarySet,
    DesignSchedule,
    GridUnderflowWarning,
    InfeasibleSpendError,
    StagewiseExceedance,
    StoppingDensity,
    SubDensity,
    UnattainableOutcomeError,
    crossing_prob,
    exceedance_prob,
    initial_subdensity,
    mle_at_stop,
    propagate,
    solve_spending_boundaries,
    stagewise_ci,
    stopping_density,
)
from .frequentist import (
    SpendingFunction,
    UnequalGroupsError,
    conditional_power,
    curtailment_boundary,
    curtailment_design,
    obrien_fleming,
    pocock,
    spend,
    spending_boundaries,
)
from .numerics import (
    Grid,
    NoSignChangeError,
    RootConvergenceError,
    find_root,
    make_grid,
    norm_cdf,
    norm_pdf,
    norm_quantile,
)
from .simulate import (
    OCReport,
    Scenario,
    TrialRecord,
    estimate_oc,
    run_scenario,
    scenario_grid,
    universal_bound_check,
)

__version__ = "0.1.0"
