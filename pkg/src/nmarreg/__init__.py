"""Kernel regression and plug-in classification with NMAR responses.

The package estimates a regression curve when some responses are missing not
at random: the missingness odds factor over the response is picked from a
finite cover by inverse-weighted validation risk on a data split, feeding
either a plug-in kernel estimator or a Horvitz-Thompson inverse-weighted
one, with a Monte Carlo harness for consistency and rate experiments.
"""

from .classify import (
    Classifier,
    MarginReport,
    RiskReport,
    bayes_classifier,
    bayes_oracle,
    bayes_risk_value,
    classifier_from_estimate,
    margin_diagnostic,
    plugin_classify,
    risk_report,
)
from .cover import (
    CoverValidation,
    PhiCover,
    PhiFunction,
    build_exp_cover,
    build_tabulated_cover,
    constant_phi,
    covering_number_bound,
    epsilon_schedule,
    exp_phi,
    uniform_grid,
    validate_cover,
)
from .data import (
    DataSplit,
    Dataset,
    MODEL_PRESETS,
    Observation,
    SyntheticModel,
    TruthRecord,
    UniformBox,
    generate,
    read_csv,
    split,
    write_csv,
)
from .harness import (
    ESTIMATOR_NAMES,
    CoverSettings,
    ExperimentConfig,
    ExperimentResult,
    RateFit,
    ResultRow,
    fit_estimator,
    lp_error,
    rate_fit,
    run_experiment,
)
from .ht import (
    HTConfig,
    fit_ht,
    ht_m_hat,
    ht_m_hat_weighted,
    loo_functionals,
    pi_breve,
    pi_tilde,
    select_phi_ht,
    validation_pi,
)
from .kernels import (
    BandwidthPolicy,
    KernelSpec,
    bandwidth,
    box_kernel,
    triangle_kernel,
    truncated_gaussian_kernel,
)
from .plugin import (
    DiscreteJoint,
    RegressionEstimate,
    eta_hat,
    eta_hat_m,
    m_hat_gamma,
    m_hat_m_phi,
    nw_estimate,
    psi_hat_m,
    representation_oracle,
)
from .selection import (
    RHO_FLOOR,
    SelectionProbabilityModel,
    SelectionResult,
    empirical_risk,
    estimate_exp_g,
    fit,
    pi_hat,
    select_phi,
    write_risk_table,
)
from .smoothing import KernelSums, Smoothing, ratio0

__version__ = "0.1.0"
