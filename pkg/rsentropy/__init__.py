"""
rsentropy - Entropy, mutual information and KL divergence estimation from ranked set samples.

This library provides tools for:
- Drawing balanced multistage ranked set samples from parent models or finite populations
- Kernel plug-in entropy estimation with rule, fixed or cross-validated bandwidths
- Mutual information, standardized mutual information and KL divergence
- Approximate relative efficiencies against simple random sampling
- Monte Carlo studies with reproducible seeds and a SQLite results store

Basic Usage:
    from rsentropy import BandwidthPolicy, BivariateNormal, Design, draw_mrss, estimate_entropy
    from rsentropy import scaled_gaussian

    sample = draw_mrss(BivariateNormal(0.9), Design(k=3, m=10, r=2, rank_by=1), seed=1)
    report = estimate_entropy(sample, scaled_gaussian(), BandwidthPolicy.rule(1.2), coordinates=[0])
    print(f"H = {report.H:.3f} (CV = {report.cv:.4f}, M_hat = {report.mse_hat:.4f})")

Mutual information:
    from rsentropy import mutual_information, piecewise_joe, bandwidth_rule

    gamma = bandwidth_rule(sample, d1=0.7, p=2)
    mi = mutual_information(sample, piecewise_joe(2), gamma)
    print(f"I = {mi.I_hat:.3f}, standardized = {mi.I_std:.3f}")

Simulation:
    from rsentropy import ExperimentSpec, run_experiment

    spec = ExperimentSpec(rhos=[0.9], designs=[(3, 10, 1), (3, 10, 2)], replications=500)
    rows = run_experiment(spec, verbose=True)
"""

__version__ = "0.1.0"

# Errors
from .errors import (
    ConfigurationError,
    DomainError,
    EvaluationError,
    IngestionError,
    NumericalError,
    ParameterError,
    RSEntropyError,
    RSEntropyWarning,
    SizeError,
)

# Models and sampling
from .parents import BivariateNormal, MultivariateNormal, Normal, ParentModel, Uniform, parent_from_dict
from .designs import Design, FinitePopulation, RankedSetSample, draw_mrss, draw_srs

# Kernels and density estimation
from .kernels import KernelSpec, kernel_by_name, piecewise_joe, scaled_gaussian, solve_joe_constants
from .density import DensityEstimate, kde_eval, ecdf_eval

# Estimators
from .entropy import (
    BandwidthPolicy,
    EntropyReport,
    SupportSpec,
    alpha_hats,
    bandwidth_rule,
    cv_gamma,
    cv_profile,
    entropy_rss,
    estimate_entropy,
    mse_hat,
    select_bandwidth_cv,
)
from .divergence import (
    MiReport,
    entropy_population,
    kl_divergence,
    mutual_information,
    mutual_information_rule,
    population_mutual_information,
    select_variables,
    standardized_mi,
)

# Theory
from .theory import (
    alpha_beta,
    approx_mse,
    relative_efficiency,
    relative_efficiency_grid,
    smoothing_bias,
)

# Simulation, configuration and storage
from .config import BandwidthTables, load_experiment_spec
from .simlab import AggregateRow, ExperimentSpec, finite_population_study, run_experiment, tune_d1
from .db import ResultsDatabase
from .analytics import ResultsAnalytics, compare_with_reference, generate_report

__all__ = [
    # Errors
    'RSEntropyError',
    'ParameterError',
    'SizeError',
    'DomainError',
    'IngestionError',
    'ConfigurationError',
    'EvaluationError',
    'NumericalError',
    'RSEntropyWarning',
    # Models and sampling
    'ParentModel',
    'Normal',
    'Uniform',
    'BivariateNormal',
    'MultivariateNormal',
    'parent_from_dict',
    'Design',
    'RankedSetSample',
    'FinitePopulation',
    'draw_mrss',
    'draw_srs',
    # Kernels and density estimation
    'KernelSpec',
    'scaled_gaussian',
    'piecewise_joe',
    'kernel_by_name',
    'solve_joe_constants',
    'DensityEstimate',
    'kde_eval',
    'ecdf_eval',
    # Estimators
    'SupportSpec',
    'BandwidthPolicy',
    'EntropyReport',
    'entropy_rss',
    'bandwidth_rule',
    'cv_gamma',
    'cv_profile',
    'select_bandwidth_cv',
    'alpha_hats',
    'mse_hat',
    'estimate_entropy',
    'MiReport',
    'mutual_information',
    'mutual_information_rule',
    'standardized_mi',
    'kl_divergence',
    'entropy_population',
    'population_mutual_information',
    'select_variables',
    # Theory
    'alpha_beta',
    'approx_mse',
    'smoothing_bias',
    'relative_efficiency',
    'relative_efficiency_grid',
    # Simulation, configuration and storage
    'BandwidthTables',
    'load_experiment_spec',
    'ExperimentSpec',
    'AggregateRow',
    'run_experiment',
    'tune_d1',
    'finite_population_study',
    'ResultsDatabase',
    'ResultsAnalytics',
    'compare_with_reference',
    'generate_report',
]
