"""Least squares and maximum likelihood estimation for interval censored data.

Case-2 interval censoring: a latent event time ``X`` is seen only through its
position relative to two inspection times ``U < V``.  The package provides
the one-step and three-term least squares estimators, the nonparametric MLE,
optimality certificates, limit theory, smooth functional estimation and
simulation studies.
"""

from .asymptotics import (
    ModelSpec,
    chernoff_variance,
    drift_b,
    drift_b_simple,
    get_model,
    marginals,
    scale_a,
    scale_a_simple,
    sigma,
    theoretical_variance_curve,
)
from .characterization import (
    FenchelReport,
    lagrange_multipliers,
    verify_fenchel,
    verify_fenchel_simple,
    w2_process,
    w_process,
)
from .data import (
    CurrentStatusObservation,
    DataError,
    Observation2,
    Sample2,
    StepDistribution,
    evaluate,
    ingest_csv,
)
from .estimators import (
    FitResult,
    IcmOptions,
    fit_current_status,
    fit_ls_full,
    fit_ls_full_barrier,
    fit_ls_simple,
    fit_mle_ic2,
)
from .functionals import (
    ScoreSolution,
    build_score_system,
    estimate_mean,
    functional_variance_study,
    solve_scores,
    theta_values,
)
from .isotonic import CusumDiagram, gcm_left_slopes, pava
from .simulation import StudyConfig, StudyTable, gen_example1, gen_triangle, variance_grid_study

__version__ = "0.1.0"

__all__ = [
    "CurrentStatusObservation", "CusumDiagram", "DataError", "FenchelReport", "FitResult",
    "IcmOptions", "ModelSpec", "Observation2", "Sample2", "ScoreSolution", "StepDistribution",
    "StudyConfig", "StudyTable", "build_score_system", "chernoff_variance", "drift_b",
    "drift_b_simple", "estimate_mean", "evaluate", "fit_current_status", "fit_ls_full",
    "fit_ls_full_barrier", "fit_ls_simple", "fit_mle_ic2", "functional_variance_study",
    "gcm_left_slopes", "gen_example1", "gen_triangle", "get_model", "ingest_csv",
    "lagrange_multipliers", "marginals", "pava", "scale_a", "scale_a_simple", "sigma",
    "solve_scores", "theoretical_variance_curve", "theta_values", "variance_grid_study",
    "verify_fenchel", "verify_fenchel_simple", "w2_process", "w_process",
]
