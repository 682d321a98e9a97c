"""Bayesian reconstruction of two-sex populations of the recent past.

A deterministic cohort-component projection maps baseline counts and
period vital rates to a full population trajectory; a hierarchical
model ties those inputs to initial estimates and census counts; a
Metropolis-within-Gibbs sampler draws the joint posterior of the
demographic parameters and their error variances; summaries turn the
draws into credible intervals, indicator trajectories and trend
probabilities.
"""

__version__ = "0.1.0"

from .grid import (FEMALE, MALE, PARAM_CLASSES, SEX_LABELS,
                   CensusData, Elicitation, ModelGrid, ThetaVector,
                   ValidationReport, VarianceParams, validate)
from .projection import (PeriodRates, PopulationState, Trajectory, build_leslie,
                         period_rates, positivity_indicator, project_full,
                         project_step, total_births)
from .indicators import (IndicatorSeries, avg_annual_net_migrants, indicator_series,
                         life_expectancy, sex_diff_e0, sex_ratio_u5mr, sru5, srtp,
                         tfr, u5mr)
from .priors import (ElicitationError, HyperParams, InitialEstimates,
                     beta_from_elicitation, log_invgamma, log_likelihood_census,
                     log_prior_theta, t_quantile_95, transform, untransform)
from .sampler import (ChainState, ConfigError, PosteriorSample, SamplerConfig,
                      SamplingError, gibbs_update_variances, log_posterior,
                      mh_update_component, parameter_names, residual_squares,
                      run_chain, variance_posterior)
from .diagnostics import RunLengthReport, gelman_rubin, raftery_lewis
from .summaries import (INDICATOR_NAMES, TrajectoryMatrix, endpoint_diff,
                        exceedance_prob, indicator_trajectories, joint_event_prob,
                        marginal_quantiles, mean_half_width, ols_slope, summary_rows)
from .simulate import (SimulatedData, draw_joint, draw_theta, draw_variances,
                       prior_sample, simulate_dataset, variance_draws)
from .io import (ParseError, RunManifest, load_census, load_elicitation,
                 load_grid, load_sampler_settings, load_theta, make_manifest,
                 read_samples, sha256_file, write_census, write_samples,
                 write_theta, write_trajectory)
