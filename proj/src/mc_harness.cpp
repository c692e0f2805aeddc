#include "pja/mc_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "pja/parallel.hpp"
#include "pja/power_variation.hpp"
#include "pja/rng.hpp"
#include "pja/stable_math.hpp"

namespace pja {

namespace {

constexpr std::size_t kRepChunk = 8;
constexpr std::size_t kQmcPointsCurve = std::size_t(1) << 14;

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", x);
  return buf;
}

std::ofstream open_out(const std::string& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot open for writing: " + file);
  return out;
}

double quantile_sorted(const std::vector<double>& xs, double q) {
  const std::size_t n = xs.size();
  if (n == 1) return xs[0];
  const double h = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return xs[n - 1];
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

double sample_var(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  require_domain(n >= 2, "variance needs at least two values");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(n - 1);
}

// least-squares slope of ln(y) on ln(x)
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  require_domain(n >= 2 && y.size() == n, "slope fit needs two or more points");
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DegenerateError("slope fit: nonpositive value");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  return sxy / sxx;
}

void validate_config(const ExperimentConfig& cfg) {
  require_domain(cfg.reps >= 1, "reps must be positive");
  require_domain(cfg.M >= 2, "M must be at least 2");
  require_domain(cfg.T > 0.0, "T must be positive");
  require_domain(cfg.conf > 0.0 && cfg.conf < 1.0, "conf must lie in (0, 1)");
  if (!cfg.model) {
    require_domain(cfg.case_id >= 'A' && cfg.case_id <= 'D', "case_id must be A, B, C, or D");
  } else {
    require_domain(cfg.beta_true > 0.0 && cfg.beta_true <= 2.0,
                   "explicit model needs beta_true in (0, 2]");
  }
}

ActivityEstimate flagged_failure() {
  ActivityEstimate est;
  est.flags.fs_invalid = true;
  est.flags.ts_invalid = true;
  est.ok = false;
  est.avar_ok = false;
  return est;
}

}  // namespace

ModelSpec case_model(char case_id) {
  ModelSpec m;
  switch (case_id) {
    case 'A':
      m.sigma2 = 1.0;
      m.jump_kind = JumpTemperedStable{1.0, 1.5, 0.25};
      return m;
    case 'B':
      m.sigma2 = 1.0;
      m.jump_kind = JumpTemperedStable{1.0, 1.75, 0.25};
      return m;
    case 'C':
      m.sigma1_sq = 0.8;
      return m;
    case 'D':
      m.sigma1_sq = 0.8;
      m.sigma2 = 1.0;
      m.jump_kind = JumpCompoundPoisson{1.0 / 3.0, 0.7746};
      return m;
    default:
      throw DomainError("case_id must be A, B, C, or D");
  }
}

double case_beta_true(char case_id) {
  switch (case_id) {
    case 'A':
      return 1.5;
    case 'B':
      return 1.75;
    case 'C':
    case 'D':
      return 2.0;
    default:
      throw DomainError("case_id must be A, B, C, or D");
  }
}

SampleGrid config_grid(const ExperimentConfig& cfg) {
  return SampleGrid(cfg.T, 1.0 / static_cast<double>(cfg.M));
}

ModelSpec config_model(const ExperimentConfig& cfg) {
  return cfg.model ? *cfg.model : case_model(cfg.case_id);
}

double config_beta_true(const ExperimentConfig& cfg) {
  return cfg.model ? cfg.beta_true : case_beta_true(cfg.case_id);
}

std::vector<ActivityEstimate> run_case(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const SampleGrid grid = config_grid(cfg);
  const ModelSpec model = config_model(cfg);
  const PathSimulator sim(model, grid);
  const auto tag = static_cast<std::uint64_t>(cfg.case_id);
  std::vector<ActivityEstimate> out(cfg.reps);
  parallel_chunks(
      cfg.reps, kRepChunk,
      [&](std::size_t, std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
          const std::uint64_t seed = derive_seed(cfg.base_seed, tag, i);
          try {
            const PathSeries path = sim.run(seed);
            out[i] = two_step_point(path, cfg.fs, cfg.conf);
          } catch (const std::exception&) {
            out[i] = flagged_failure();
          }
        }
      },
      cfg.workers);
  return out;
}

MCSummary summarize(std::vector<double> values) {
  if (values.empty()) throw DegenerateError("summarize: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  MCSummary s;
  s.n_used = n;
  s.median = (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  s.iqr = quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
  s.mad = mad_about(values, s.median);
  return s;
}

double mad_about(const std::vector<double>& values, double center) {
  if (values.empty()) throw DegenerateError("mad_about: no values");
  double acc = 0.0;
  for (double x : values) acc += std::abs(x - center);
  return acc / static_cast<double>(values.size());
}

CaseSummary summarize_case(const ExperimentConfig& cfg,
                           const std::vector<ActivityEstimate>& records) {
  validate_config(cfg);
  CaseSummary cs;
  cs.case_id = cfg.case_id;
  cs.beta_true = config_beta_true(cfg);
  cs.n_reps = records.size();
  std::vector<double> fs, ts;
  fs.reserve(records.size());
  ts.reserve(records.size());
  for (const auto& r : records) {
    if (!r.flags.fs_invalid) fs.push_back(r.beta_fs);
    if (r.ok) ts.push_back(r.beta_ts);
    if (r.flags.fs_invalid || !r.ok) ++cs.n_flagged;
  }
  cs.one_step = summarize(fs);
  cs.two_step = summarize(ts);
  cs.one_step_mad_true = mad_about(fs, cs.beta_true);
  cs.two_step_mad_true = mad_about(ts, cs.beta_true);
  return cs;
}

TableThreeRow se_precision_row(const ExperimentConfig& cfg,
                               const std::vector<ActivityEstimate>& records) {
  validate_config(cfg);
  const SampleGrid grid = config_grid(cfg);
  std::vector<double> ts, stats;
  ts.reserve(records.size());
  stats.reserve(records.size());
  for (const auto& r : records) {
    if (r.ok) ts.push_back(r.beta_ts);
    if (r.ok && r.avar_ok) stats.push_back(std::sqrt(grid.T * r.avar_hat));
  }
  TableThreeRow row;
  row.case_id = cfg.case_id;
  row.exact_scaled_sd = std::sqrt(grid.T / grid.delta_n * sample_var(ts));
  const MCSummary s = summarize(stats);
  row.est_median = s.median;
  row.est_iqr = s.iqr;
  row.est_mad = mad_about(stats, row.exact_scaled_sd);
  row.n_used = stats.size();
  return row;
}

std::vector<ConvergenceRow> convergence_study(const ModelSpec& model,
                                              const std::vector<double>& p_grid,
                                              const std::vector<double>& delta_grid, double T,
                                              std::size_t reps, std::uint64_t seed,
                                              unsigned workers) {
  const auto* jump = std::get_if<JumpStable>(&model.jump_kind);
  require_domain(jump != nullptr && model.sigma1_sq == 0.0 && model.drift == 0.0 &&
                     model.vol_path.empty() && model.sigma2 > 0.0,
                 "convergence_study needs a pure stable-jump model");
  require_domain(!p_grid.empty() && !delta_grid.empty(), "empty study grid");
  require_domain(reps >= 2, "convergence_study needs reps >= 2");
  const double beta = jump->beta;
  const double pi_c = pi_const(jump->A, beta);
  const std::size_t np = p_grid.size(), nd = delta_grid.size();
  std::vector<double> limit(np);
  for (std::size_t k = 0; k < np; ++k) {
    require_domain(p_grid[k] > 0.0 && p_grid[k] < beta, "power outside (0, beta)");
    limit[k] = T * std::pow(model.sigma2, p_grid[k]) * std::pow(pi_c, p_grid[k] / beta) *
               mu_p(p_grid[k], beta);
  }

  // err[(level, p, rep)] laid out per level for a sequential reduction
  std::vector<ConvergenceRow> rows(np * nd);
  std::vector<std::vector<double>> sd_by_p(np, std::vector<double>(nd));
  for (std::size_t d = 0; d < nd; ++d) {
    const SampleGrid grid(T, delta_grid[d]);
    const PathSimulator sim(model, grid);
    std::vector<double> err(np * reps);
    parallel_chunks(
        reps, kRepChunk,
        [&](std::size_t, std::size_t i0, std::size_t i1) {
          for (std::size_t i = i0; i < i1; ++i) {
            const PathSeries path = sim.run(derive_seed(seed, d, i));
            const PVTable table = pv_table(path, p_grid);
            for (std::size_t k = 0; k < np; ++k) {
              const double scaled =
                  std::pow(grid.delta_n, 1.0 - p_grid[k] / beta) * table.values_fine[k];
              err[k * reps + i] = scaled - limit[k];
            }
          }
        },
        workers);
    for (std::size_t k = 0; k < np; ++k) {
      const std::vector<double> ek(err.begin() + static_cast<std::ptrdiff_t>(k * reps),
                                   err.begin() + static_cast<std::ptrdiff_t>((k + 1) * reps));
      ConvergenceRow& row = rows[k * nd + d];
      row.p = p_grid[k];
      row.delta_n = grid.delta_n;
      double mean = 0.0, mean_abs = 0.0;
      for (double e : ek) {
        mean += e;
        mean_abs += std::abs(e);
      }
      row.mean_err = mean / static_cast<double>(reps);
      row.mean_abs_err = mean_abs / static_cast<double>(reps);
      row.sd_err = std::sqrt(sample_var(ek));
      sd_by_p[k][d] = row.sd_err;
    }
  }
  for (std::size_t k = 0; k < np; ++k) {
    const double slope = loglog_slope(delta_grid, sd_by_p[k]);
    for (std::size_t d = 0; d < nd; ++d) rows[k * nd + d].slope = slope;
  }
  return rows;
}

std::vector<RateRow> rate_study(char case_id, const std::vector<unsigned>& m_levels, double T,
                                std::size_t reps, std::uint64_t seed, unsigned workers) {
  require_domain(m_levels.size() >= 2, "rate_study needs two or more grid levels");
  require_domain(reps >= 2, "rate_study needs reps >= 2");
  const ModelSpec model = case_model(case_id);
  std::vector<RateRow> rows(m_levels.size());
  std::vector<double> deltas(m_levels.size()), sds(m_levels.size());
  for (std::size_t lvl = 0; lvl < m_levels.size(); ++lvl) {
    ExperimentConfig cfg;
    cfg.case_id = case_id;
    cfg.M = m_levels[lvl];
    cfg.T = T;
    cfg.reps = reps;
    cfg.base_seed = derive_seed(seed, 101, lvl);
    cfg.workers = workers;
    const auto records = run_case(cfg);
    std::vector<double> ts;
    ts.reserve(reps);
    for (const auto& r : records)
      if (r.ok) ts.push_back(r.beta_ts);
    rows[lvl].delta_n = 1.0 / static_cast<double>(m_levels[lvl]);
    rows[lvl].sd_ts = std::sqrt(sample_var(ts));
    deltas[lvl] = rows[lvl].delta_n;
    sds[lvl] = rows[lvl].sd_ts;
  }
  const double slope = loglog_slope(deltas, sds);
  for (auto& row : rows) row.slope = slope;
  return rows;
}

CovCheckRow cov_check(double beta, double p, double q, std::size_t reps, double delta_n,
                      double T, std::uint64_t seed, unsigned workers) {
  require_domain(beta > 0.0 && beta <= 2.0, "beta must lie in (0, 2]");
  require_domain(reps >= 2, "cov_check needs reps >= 2");
  CovCheckRow row;
  row.beta = beta;
  row.p = p;
  row.q = q;
  const auto theo = clt_cov_matrix(p, q, beta);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) row.theoretical[a][b] = T * theo[a][b];

  ModelSpec model;
  if (beta < 2.0) {
    model.sigma2 = 1.0;
    model.jump_kind = JumpStable{1.0 / pi_const(1.0, beta), beta};
  } else {
    model.sigma1_sq = 1.0;
  }
  const SampleGrid grid(T, delta_n);
  const PathSimulator sim(model, grid);

  const bool same = std::abs(p - q) < 1e-14;
  const std::vector<double> powers = same ? std::vector<double>{p} : std::vector<double>{p, q};
  const double mu_pv = mu_p(p, beta), mu_qv = mu_p(q, beta);
  const double root_dn = std::sqrt(grid.delta_n);
  // per rep: (Yc(p), Yf(p), Yc(q), Yf(q))
  std::vector<double> samples(4 * reps);
  parallel_chunks(
      reps, kRepChunk,
      [&](std::size_t, std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
          const PathSeries path = sim.run(derive_seed(seed, 0, i));
          const PVTable table = pv_table(path, powers);
          const std::size_t qi = same ? 0 : 1;
          const double sp = std::pow(grid.delta_n, 1.0 - p / beta);
          const double sq = std::pow(grid.delta_n, 1.0 - q / beta);
          samples[4 * i + 0] =
              (sp * table.values_coarse[0] - T * std::pow(2.0, p / beta - 1.0) * mu_pv) / root_dn;
          samples[4 * i + 1] = (sp * table.values_fine[0] - T * mu_pv) / root_dn;
          samples[4 * i + 2] =
              (sq * table.values_coarse[qi] - T * std::pow(2.0, q / beta - 1.0) * mu_qv) / root_dn;
          samples[4 * i + 3] = (sq * table.values_fine[qi] - T * mu_qv) / root_dn;
        }
      },
      workers);

  double mean[4] = {};
  for (std::size_t i = 0; i < reps; ++i)
    for (int c = 0; c < 4; ++c) mean[c] += samples[4 * i + c];
  for (double& m : mean) m /= static_cast<double>(reps);
  double acc[2][2] = {};
  for (std::size_t i = 0; i < reps; ++i)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        acc[a][b] += (samples[4 * i + a] - mean[a]) * (samples[4 * i + 2 + b] - mean[2 + b]);
  double worst = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      row.empirical[a][b] = acc[a][b] / static_cast<double>(reps - 1);
      row.rel_err[a][b] =
          std::abs(row.empirical[a][b] - row.theoretical[a][b]) / std::abs(row.theoretical[a][b]);
      worst = std::max(worst, row.rel_err[a][b]);
    }
  row.max_rel_err = worst;
  return row;
}

void write_table2(const std::vector<CaseSummary>& rows, const std::string& file) {
  auto out = open_out(file);
  out << "case,estimator,beta_true,median,iqr,mad,n_flagged,mad_true\n";
  for (const auto& cs : rows) {
    out << cs.case_id << ",one_step," << fmt_g(cs.beta_true) << ',' << fmt_g(cs.one_step.median)
        << ',' << fmt_g(cs.one_step.iqr) << ',' << fmt_g(cs.one_step.mad) << ','
        << (cs.n_reps - cs.one_step.n_used) << ',' << fmt_g(cs.one_step_mad_true) << '\n';
    out << cs.case_id << ",two_step," << fmt_g(cs.beta_true) << ',' << fmt_g(cs.two_step.median)
        << ',' << fmt_g(cs.two_step.iqr) << ',' << fmt_g(cs.two_step.mad) << ','
        << (cs.n_reps - cs.two_step.n_used) << ',' << fmt_g(cs.two_step_mad_true) << '\n';
  }
  if (!out) throw IoError("write failed: " + file);
}

void write_table3(const std::vector<TableThreeRow>& rows, const std::string& file) {
  auto out = open_out(file);
  out << "case,exact_scaled_sd,est_median,est_iqr,est_mad\n";
  for (const auto& r : rows) {
    out << r.case_id << ',' << fmt_g(r.exact_scaled_sd) << ',' << fmt_g(r.est_median) << ','
        << fmt_g(r.est_iqr) << ',' << fmt_g(r.est_mad) << '\n';
  }
  if (!out) throw IoError("write failed: " + file);
}

void write_histogram(const ExperimentConfig& cfg, const std::vector<ActivityEstimate>& records,
                     const std::string& file) {
  validate_config(cfg);
  constexpr int kBins = 100;
  const double beta_true = config_beta_true(cfg);
  const double lo = beta_true - 0.5;
  const double width = 1.0 / kBins;
  std::vector<std::size_t> fs(kBins, 0), ts(kBins, 0);
  const auto deposit = [&](std::vector<std::size_t>& bins, double x) {
    const double rel = (x - lo) / width;
    if (rel < 0.0 || rel >= kBins) return;
    ++bins[static_cast<std::size_t>(rel)];
  };
  for (const auto& r : records) {
    if (!r.flags.fs_invalid) deposit(fs, r.beta_fs);
    if (r.ok) deposit(ts, r.beta_ts);
  }
  auto out = open_out(file);
  out << "bin_lo,bin_hi,count_one_step,count_two_step\n";
  for (int k = 0; k < kBins; ++k) {
    out << fmt_g(lo + k * width) << ',' << fmt_g(lo + (k + 1) * width) << ',' << fs[k] << ','
        << ts[k] << '\n';
  }
  if (!out) throw IoError("write failed: " + file);
}

void write_curves_k(const std::vector<double>& beta_grid, double p_step, const std::string& file) {
  require_domain(p_step > 0.0 && p_step < 1.0, "p_step must lie in (0, 1)");
  auto out = open_out(file);
  out << "beta,p,sqrt_k\n";
  for (double beta : beta_grid) {
    const double cap = power_upper_cap(beta);
    const double lb = power_lower_bound(beta);
    for (int k = 1; k * p_step <= cap + 1e-12; ++k) {
      const double p = std::min(k * p_step, cap);
      if (p < lb - 1e-12) continue;
      const double kv = k_kernel(p, p, beta, kQmcPointsCurve);
      out << fmt_g(beta) << ',' << fmt_g(p) << ',' << fmt_g(std::sqrt(kv)) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + file);
}

void write_curve_pstar(const std::vector<double>& beta_grid, const std::string& file) {
  auto out = open_out(file);
  out << "beta,p_star,sqrt_k,clamped\n";
  for (double beta : beta_grid) {
    const PowerChoice pc = PowerMap::instance().at(beta);
    out << fmt_g(beta) << ',' << fmt_g(pc.p) << ',' << fmt_g(std::sqrt(pc.k_value)) << ','
        << (pc.clamped ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failed: " + file);
}

void write_convergence(const std::vector<ConvergenceRow>& rows, const std::string& file) {
  auto out = open_out(file);
  out << "p,delta_n,mean_err,sd_err,mean_abs_err,slope\n";
  for (const auto& r : rows) {
    out << fmt_g(r.p) << ',' << fmt_g(r.delta_n) << ',' << fmt_g(r.mean_err) << ','
        << fmt_g(r.sd_err) << ',' << fmt_g(r.mean_abs_err) << ',' << fmt_g(r.slope) << '\n';
  }
  if (!out) throw IoError("write failed: " + file);
}

}  // namespace pja
