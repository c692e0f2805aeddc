#include "pja/activity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "pja/normal.hpp"
#include "pja/stable_math.hpp"

namespace pja {
namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kLn2 = 0.69314718055994530941723212145818;
constexpr double kFsLo = 0.2;
constexpr double kFsHi = 2.0;
constexpr double kSnapThreshold = 1.9;  // first step this high selects the beta = 2 power

// QMC size for covariance kernels off the optimal-power map (clamped powers,
// weighted schemes); the map nodes themselves carry higher-resolution values.
constexpr std::size_t kQmcPointsLocal = std::size_t(1) << 14;

struct Gl32 {
  std::array<double, 32> x;  // nodes on [-1, 1]
  std::array<double, 32> w;
};

// Gauss-Legendre nodes from Newton iteration on the recurrence; deterministic
// and accurate to machine precision, so there is no constant table to maintain.
const Gl32& gl32() {
  static const Gl32 rule = [] {
    Gl32 r;
    const int n = 32;
    for (int i = 0; i < n / 2; ++i) {
      double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        pp = n * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / pp;
        z -= dz;
        if (std::abs(dz) < 1e-15) break;
      }
      r.x[i] = -z;
      r.x[n - 1 - i] = z;
      r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return r;
  }();
  return rule;
}

double clamp_with_flag(double v, double lo, double hi, bool* flagged) {
  const double c = std::clamp(v, lo, hi);
  if (c != v) *flagged = true;
  return c;
}

// Second-stage power for a given (clamped) first-step value.
double select_tau(double beta_cl, bool* tau_clamped) {
  if (beta_cl > kSnapThreshold) return PowerMap::instance().at(kFsHi).p;
  const PowerChoice pc = PowerMap::instance().at(beta_cl);
  const double lo = std::max(0.05, power_lower_bound(beta_cl));
  const double hi = power_upper_cap(beta_cl);
  const double tau = std::clamp(pc.p, lo, hi);
  if (pc.clamped || tau != pc.p) *tau_clamped = true;
  return tau;
}

// Kernel K_{tau,tau}(beta): the interpolated map value when tau sits on the
// map, otherwise a direct (lower-resolution) evaluation.
double kernel_at(double beta, double tau) {
  const PowerChoice pc = PowerMap::instance().at(beta);
  if (std::abs(tau - pc.p) <= 1e-9) return pc.k_value;
  return k_kernel(tau, tau, beta, kQmcPointsLocal);
}

double feasible_avar_values(double v_tau_fine, double v_2tau_fine, double delta_n,
                            double beta_ts, double tau) {
  require_domain(tau > 0.0, "feasible_avar: tau must be positive");
  require_domain(beta_ts > 0.0, "feasible_avar: beta must be positive");
  double beta_use = beta_ts;
  if (beta_ts >= 2.0) {
    beta_use = 2.0;
    require_domain(tau <= 1.0 + 1e-12, "feasible_avar: tau must not exceed 1 at beta = 2");
    tau = std::min(tau, 1.0);
  } else {
    require_domain(2.0 * tau < beta_ts,
                   "feasible_avar: need 2 tau < beta (second moment of |Z|^tau diverges)");
  }
  require_domain(v_tau_fine > 0.0 && v_2tau_fine > 0.0,
                 "feasible_avar: power variations must be positive");
  const double k = kernel_at(beta_use, tau);
  const double m1 = mu_p(tau, beta_use);
  const double m2 = mu_p(2.0 * tau, beta_use);
  return (k / delta_n) * (m1 * m1 / m2) * v_2tau_fine / (v_tau_fine * v_tau_fine);
}

// Variance stage of the two-step estimator: the power is re-derived from the
// second-step value itself, capped so the plug-in moments stay finite.
void attach_avar(const PathSeries& path, ActivityEstimate* e) {
  const double bts_cl = std::clamp(e->beta_ts, kFsLo, kFsHi);
  try {
    double f;
    if (bts_cl >= kFsHi) {
      f = PowerMap::instance().at(kFsHi).p;
    } else {
      const PowerChoice pc = PowerMap::instance().at(bts_cl);
      f = std::min(pc.p, power_upper_cap(bts_cl));
    }
    const double v1 = realized_pv(path, f, 1);
    const double v2 = realized_pv(path, 2.0 * f, 1);
    const double avar = feasible_avar_values(v1, v2, path.grid.delta_n, bts_cl, f);
    if (!std::isfinite(avar) || avar < 0.0) throw DegenerateError("avar not finite");
    e->avar_hat = avar;
    e->se_hat = std::sqrt(path.grid.delta_n * avar);
    const double z = norm_quantile(0.5 * (1.0 + e->conf));
    e->ci_lo = e->beta_ts - z * e->se_hat;
    e->ci_hi = e->beta_ts + z * e->se_hat;
    e->avar_ok = true;
  } catch (const DomainError&) {
    e->flags.avar_invalid = true;
  } catch (const DegenerateError&) {
    e->flags.avar_invalid = true;
  }
}

// First step shared by the two-step drivers; flags instead of throwing so a
// failed replication is recorded, not aborted.
bool run_first_step(const PathSeries& path, const FsSpec& fs, ActivityEstimate* e) {
  try {
    e->beta_fs = fs.kind == FsSpec::Kind::fixed_power
                     ? first_step_fixed_power(path, fs.p0)
                     : first_step_truncated(path, fs.alpha);
  } catch (const DegenerateError&) {
    e->flags.fs_invalid = true;
    return false;
  }
  return true;
}

}  // namespace

double first_step_fixed_power(const PathSeries& path, double p0) {
  require_domain(p0 > 0.0 && p0 < 1.0, "first step: p0 must lie in (0,1)");
  const BPoint b = b_ratio(path, p0);
  if (!b.valid) throw DegenerateError("first step: degenerate power-variation ratio");
  return b.b;
}

double first_step_truncated_from_counts(std::size_t fine, std::size_t coarse) {
  if (fine == 0 || coarse == 0)
    throw DegenerateError("truncated first step: no increments over the threshold");
  return (2.0 / kLn2) *
         (std::log(static_cast<double>(fine)) - std::log(static_cast<double>(coarse)));
}

double first_step_truncated(const PathSeries& path, double alpha) {
  require_domain(alpha > 0.0, "truncated first step: alpha must be positive");
  return first_step_truncated_from_counts(truncated_count(path, alpha, 1),
                                          truncated_count(path, alpha, 2));
}

ActivityEstimate two_step_point(const PathSeries& path, const FsSpec& fs, double conf_level) {
  require_domain(conf_level > 0.0 && conf_level < 1.0,
                 "two_step_point: confidence level must lie in (0,1)");
  ActivityEstimate e;
  e.conf = conf_level;
  if (!run_first_step(path, fs, &e)) return e;
  const double bfs_cl = clamp_with_flag(e.beta_fs, kFsLo, kFsHi, &e.flags.fs_clamped);
  e.tau_hat = select_tau(bfs_cl, &e.flags.tau_clamped);
  const BPoint ts = b_ratio(path, e.tau_hat);
  if (!ts.valid) {
    e.flags.ts_invalid = true;
    return e;
  }
  e.beta_ts = ts.b;
  e.ok = true;
  attach_avar(path, &e);
  return e;
}

WeightScheme WeightScheme::uniform(std::function<double(double)> lo,
                                   std::function<double(double)> hi) {
  WeightScheme s;
  s.kind = Kind::uniform;
  s.f_l = std::move(lo);
  s.f_h = std::move(hi);
  return s;
}

WeightScheme WeightScheme::uniform_window(double half_width) {
  require_domain(half_width > 0.0, "uniform_window: half width must be positive");
  auto clip = [](double v, double beta) {
    const double lo = std::max(0.05, power_lower_bound(beta));
    return std::clamp(v, lo, power_upper_cap(beta));
  };
  return uniform([=](double beta) { return clip(PowerMap::instance().at(beta).p - half_width, beta); },
                 [=](double beta) { return clip(PowerMap::instance().at(beta).p + half_width, beta); });
}

ActivityEstimate two_step_weighted(const PathSeries& path, const WeightScheme& scheme,
                                   const FsSpec& fs, double conf_level) {
  if (scheme.kind == WeightScheme::Kind::dirac) return two_step_point(path, fs, conf_level);
  require_domain(conf_level > 0.0 && conf_level < 1.0,
                 "two_step_weighted: confidence level must lie in (0,1)");
  require_domain(static_cast<bool>(scheme.f_l) && static_cast<bool>(scheme.f_h),
                 "two_step_weighted: uniform scheme needs both bounds");
  ActivityEstimate e;
  e.conf = conf_level;
  if (!run_first_step(path, fs, &e)) return e;
  const double bfs_cl = clamp_with_flag(e.beta_fs, kFsLo, kFsHi, &e.flags.fs_clamped);
  const double a = scheme.f_l(bfs_cl);
  const double b = scheme.f_h(bfs_cl);
  require_domain(a > 0.0 && a < b && b < 0.5 * bfs_cl + 1e-12,
                 "two_step_weighted: weight support must lie in (0, beta_fs/2)");
  e.tau_hat = 0.5 * (a + b);

  const Gl32& rule = gl32();
  std::vector<double> nodes(rule.x.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    nodes[i] = 0.5 * (a + b) + 0.5 * (b - a) * rule.x[i];

  // One pass serves both the node powers and a grid for interpolating the
  // fine-scale variation at the 528 pairwise power sums.
  constexpr int kSumGrid = 16;
  const double s_lo = 2.0 * a, s_hi = 2.0 * b;
  const double h = (s_hi - s_lo) / (kSumGrid - 1);
  std::vector<double> powers = nodes;
  for (int g = 0; g < kSumGrid; ++g) powers.push_back(s_lo + h * g);
  const PVTable table = pv_table(path, powers);

  double acc = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const BPoint bp = b_from_values(table.values_fine[i], table.values_coarse[i], nodes[i]);
    if (!bp.valid) {
      e.flags.ts_invalid = true;
      return e;
    }
    acc += rule.w[i] * bp.b;  // scaled weights sum to 2, density 1/(b-a) absorbs the rest
  }
  e.beta_ts = 0.5 * acc;  // (b-a)/2 Jacobian against the 1/(b-a) density
  e.ok = true;

  // Plug-in variance: the kernel double integral over the same nodes, each
  // (u, v) term carrying the same moment and variation-ratio correction as the
  // point estimator.  Kernel and moments sit at the beta that defined the
  // support, which keeps every power pair admissible.
  try {
    std::array<double, kSumGrid> logv;
    for (int g = 0; g < kSumGrid; ++g) {
      const double v = table.values_fine[nodes.size() + static_cast<std::size_t>(g)];
      if (!(v > 0.0)) throw DegenerateError("weighted avar: vanishing power variation");
      logv[static_cast<std::size_t>(g)] = std::log(v);
    }
    const auto v_sum = [&](double s) {  // 4-point Lagrange in ln V on the uniform grid
      const double x = (s - s_lo) / h;
      const int i0 = std::clamp(static_cast<int>(x) - 1, 0, kSumGrid - 4);
      double r = 0.0;
      for (int k = i0; k < i0 + 4; ++k) {
        double lk = 1.0;
        for (int l = i0; l < i0 + 4; ++l)
          if (l != k) lk *= (x - l) / (k - l);
        r += lk * logv[static_cast<std::size_t>(k)];
      }
      return std::exp(r);
    };
    std::array<double, 32> mu_node;
    for (std::size_t i = 0; i < nodes.size(); ++i) mu_node[i] = mu_p(nodes[i], bfs_cl);

    double kacc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (std::size_t j = i; j < nodes.size(); ++j) {
        const double s = nodes[i] + nodes[j];
        const double term = k_kernel(nodes[i], nodes[j], bfs_cl, kQmcPointsLocal) *
                            (mu_node[i] * mu_node[j] / mu_p(s, bfs_cl)) * v_sum(s) /
                            (table.values_fine[i] * table.values_fine[j]);
        kacc += (i == j ? 1.0 : 2.0) * rule.w[i] * rule.w[j] * term;
      }
    }
    const double avar = 0.25 * kacc / path.grid.delta_n;
    if (!std::isfinite(avar) || avar < 0.0) throw DegenerateError("avar not finite");
    e.avar_hat = avar;
    e.se_hat = std::sqrt(path.grid.delta_n * avar);
    const double z = norm_quantile(0.5 * (1.0 + conf_level));
    e.ci_lo = e.beta_ts - z * e.se_hat;
    e.ci_hi = e.beta_ts + z * e.se_hat;
    e.avar_ok = true;
  } catch (const DomainError&) {
    e.flags.avar_invalid = true;
  } catch (const DegenerateError&) {
    e.flags.avar_invalid = true;
  }
  return e;
}

double feasible_avar(const PVTable& table, double beta_ts, double tau) {
  double v1 = -1.0, v2 = -1.0;
  for (std::size_t i = 0; i < table.powers.size(); ++i) {
    if (std::abs(table.powers[i] - tau) <= 1e-12 * std::max(1.0, std::abs(tau)))
      v1 = table.values_fine[i];
    if (std::abs(table.powers[i] - 2.0 * tau) <= 1e-12 * std::max(1.0, 2.0 * std::abs(tau)))
      v2 = table.values_fine[i];
  }
  require_domain(v1 >= 0.0 && v2 >= 0.0, "feasible_avar: table must contain tau and 2 tau");
  return feasible_avar_values(v1, v2, table.grid.delta_n, beta_ts, tau);
}

double feasible_avar(const PathSeries& path, double beta_ts, double tau) {
  require_domain(tau > 0.0, "feasible_avar: tau must be positive");
  return feasible_avar_values(realized_pv(path, tau, 1), realized_pv(path, 2.0 * tau, 1),
                              path.grid.delta_n, beta_ts, tau);
}

}  // namespace pja
