"""Clusterwise linear regression by constrained maximum likelihood.

Finite mixtures of linear regressions fitted by EM under three variance
regimes (homoscedastic, heteroscedastic, and variances constrained to a
data-driven interval around a target), with scale-balance tuning by
cross-validated or k-deleted log likelihood, BIC-based selection of the
number of components, and a Monte Carlo study harness.
"""

from .backends import active_backend, available_backends, set_backend
from .data import Dataset, MixtureParams, Posteriors
from .em import (
    EmConfig,
    EmptyComponentError,
    FitResult,
    MultiStartResult,
    RankDeficientWarning,
    VarianceMode,
    e_step,
    fit_em,
    init_random,
    m_step,
    multi_start_fit,
    wls_solve,
)
from .metrics import LabelAlignment, adjusted_rand, align_labels, param_mse
from .methods import MethodFit, MethodSpec, fit_method
from .model import (
    component_log_density,
    individual_log_terms,
    log_likelihood,
    map_partition,
    mixture_log_density,
)
from .selection import (
    GCandidate,
    SelectionResult,
    bic,
    count_free_params,
    select_num_components,
)
from .simulation import SimDesign, SimResult, gen_dataset, make_design, run_study, summarize
from .tuning import (
    CGrid,
    CvConfig,
    TuningResult,
    cv_criterion,
    cv_folds,
    default_k,
    k_deleted_loglik,
    select_root_kdeleted,
    target_variance,
    tune_c_cv,
    tune_c_kdeleted,
)

__version__ = "0.1.0"
