#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pja/activity.hpp"

namespace pja {

// Replicated-experiment configuration.  case_id selects one of the four
// benchmark models unless an explicit model (with its true index) is supplied.
struct ExperimentConfig {
  char case_id = 'A';
  std::optional<ModelSpec> model;
  double beta_true = 0.0;  // required with an explicit model, ignored otherwise
  unsigned M = 390;        // observations per unit span
  double T = 22.0;
  std::size_t reps = 1000;
  std::uint64_t base_seed = 1;
  FsSpec fs;
  double conf = 0.95;
  unsigned workers = 0;  // 0 = PJA_WORKERS or hardware
};

ModelSpec case_model(char case_id);     // 'A'..'D'
double case_beta_true(char case_id);
SampleGrid config_grid(const ExperimentConfig& cfg);  // (T, 1/M)
ModelSpec config_model(const ExperimentConfig& cfg);
double config_beta_true(const ExperimentConfig& cfg);

// One estimate per replication, indexed by replication number.  Stream i is
// keyed by (base_seed, case_id, i), so records are a deterministic function of
// the config alone, for any worker count.  Estimator failures are recorded in
// the flags, never propagated.
std::vector<ActivityEstimate> run_case(const ExperimentConfig& cfg);

struct MCSummary {
  double median = 0.0;
  double iqr = 0.0;  // 75th minus 25th percentile, linear interpolation
  double mad = 0.0;  // mean absolute deviation about the median
  std::size_t n_used = 0;
};

// Throws DegenerateError on empty input.
MCSummary summarize(std::vector<double> values);
double mad_about(const std::vector<double>& values, double center);

// Both estimators summarized over non-flagged replications, with the
// about-true-beta deviation kept as a diagnostic.
struct CaseSummary {
  char case_id = 'A';
  double beta_true = 0.0;
  MCSummary one_step, two_step;
  double one_step_mad_true = 0.0, two_step_mad_true = 0.0;
  std::size_t n_reps = 0, n_flagged = 0;
  double runtime_sec = 0.0;
};
CaseSummary summarize_case(const ExperimentConfig& cfg,
                           const std::vector<ActivityEstimate>& records);

// Standard-error precision row: the exact scaled sd sqrt((T/delta_n) Var) from
// the replication spread of beta_ts versus the distribution of the
// per-replication statistic sqrt(T * avar_hat).  est_mad is taken about the
// exact value.
struct TableThreeRow {
  char case_id = 'A';
  double exact_scaled_sd = 0.0;
  double est_median = 0.0;
  double est_iqr = 0.0;
  double est_mad = 0.0;
  std::size_t n_used = 0;
};
TableThreeRow se_precision_row(const ExperimentConfig& cfg,
                               const std::vector<ActivityEstimate>& records);

// Scaled-PV convergence: per (p, delta_n), moments of the error
// delta_n^{1-p/beta} V(p, fine) - T Pi^{p/beta} sigma^p mu_p across reps, plus
// the fitted log-log slope of the error sd per p (repeated on that p's rows).
// Model must be a pure stable-jump specification.
struct ConvergenceRow {
  double p = 0.0;
  double delta_n = 0.0;
  double mean_err = 0.0;
  double sd_err = 0.0;
  double mean_abs_err = 0.0;
  double slope = 0.0;
};
std::vector<ConvergenceRow> convergence_study(const ModelSpec& model,
                                              const std::vector<double>& p_grid,
                                              const std::vector<double>& delta_grid, double T,
                                              std::size_t reps, std::uint64_t seed,
                                              unsigned workers = 0);

// MC sd of the two-step estimate across grid refinements of a benchmark case,
// with the fitted log-log slope against delta_n.
struct RateRow {
  double delta_n = 0.0;
  double sd_ts = 0.0;
  double slope = 0.0;
};
std::vector<RateRow> rate_study(char case_id, const std::vector<unsigned>& m_levels, double T,
                                std::size_t reps, std::uint64_t seed, unsigned workers = 0);

// Empirical covariance of the centered, delta_n^{-1/2}-scaled two-scale PV
// pair under the standard (Pi = 1) stable model, against T * clt_cov_matrix.
// First index coarse.  p != q compares the cross-covariance block.
struct CovCheckRow {
  double beta = 0.0, p = 0.0, q = 0.0;
  double empirical[2][2] = {};
  double theoretical[2][2] = {};
  double rel_err[2][2] = {};
  double max_rel_err = 0.0;
};
CovCheckRow cov_check(double beta, double p, double q, std::size_t reps, double delta_n,
                      double T, std::uint64_t seed, unsigned workers = 0);

// Reproduction artifacts.  All CSV: header row, '.' decimal, 15 significant
// digits.
void write_table2(const std::vector<CaseSummary>& rows, const std::string& file);
void write_table3(const std::vector<TableThreeRow>& rows, const std::string& file);
// 100 bins on [beta_true - 0.5, beta_true + 0.5]; values outside are dropped
void write_histogram(const ExperimentConfig& cfg, const std::vector<ActivityEstimate>& records,
                     const std::string& file);
// sqrt(K_{p,p}(beta)) over the admissible p range per beta
void write_curves_k(const std::vector<double>& beta_grid, double p_step, const std::string& file);
void write_curve_pstar(const std::vector<double>& beta_grid, const std::string& file);
void write_convergence(const std::vector<ConvergenceRow>& rows, const std::string& file);

}  // namespace pja
