#pragma once

#include <cstddef>
#include <functional>
#include <limits>

#include "pja/levy_sim.hpp"
#include "pja/power_variation.hpp"

namespace pja {

struct EstimateFlags {
  bool fs_invalid = false;   // first-step b degenerate
  bool ts_invalid = false;   // second-step b degenerate
  bool fs_clamped = false;   // beta_fs pulled into [0.2, 2.0]
  bool tau_clamped = false;  // tau moved off the optimal-power value
  bool avar_invalid = false; // variance stage failed (estimate itself still usable)
};

struct ActivityEstimate {
  double beta_fs = std::numeric_limits<double>::quiet_NaN();
  double tau_hat = std::numeric_limits<double>::quiet_NaN();
  double beta_ts = std::numeric_limits<double>::quiet_NaN();
  double avar_hat = std::numeric_limits<double>::quiet_NaN();  // var of dn^{-1/2}(b - beta)
  double se_hat = std::numeric_limits<double>::quiet_NaN();    // sqrt(delta_n * avar_hat)
  double ci_lo = std::numeric_limits<double>::quiet_NaN();
  double ci_hi = std::numeric_limits<double>::quiet_NaN();
  double conf = 0.95;
  EstimateFlags flags;
  bool ok = false;       // beta_ts is usable
  bool avar_ok = false;  // se/ci are usable
};

// First-step choice for the two-step drivers.
struct FsSpec {
  enum class Kind { fixed_power, truncated } kind = Kind::fixed_power;
  double p0 = 0.1;    // fixed_power
  double alpha = 1.0; // truncated
};

// b at a small fixed power.  Degenerate ratios throw DegenerateError.
double first_step_fixed_power(const PathSeries& path, double p0 = 0.1);

// (2/ln 2)(ln count_fine - ln count_coarse) from the alpha sqrt(scale delta_n)
// exceedance counts; zero counts throw DegenerateError.
double first_step_truncated(const PathSeries& path, double alpha);
double first_step_truncated_from_counts(std::size_t fine, std::size_t coarse);

// Adaptive two-step estimator: beta_fs (clamped to [0.2, 2.0]) picks the second
// power through the optimal-power map (snapping to the beta = 2 power once
// beta_fs > 1.9), beta_ts = b(tau_hat), and the variance stage re-derives its
// power continuously from beta_ts.
ActivityEstimate two_step_point(const PathSeries& path, const FsSpec& fs = {},
                                double conf_level = 0.95);

// Weighting across second-stage powers.  dirac reproduces two_step_point
// exactly; uniform averages b over [f_l(beta_fs), f_h(beta_fs)] with a fixed
// 32-node Gauss-Legendre rule and takes the variance from the kernel double
// integral over the same nodes, with the point estimator's plug-in correction
// applied to every node pair.
struct WeightScheme {
  enum class Kind { dirac, uniform } kind = Kind::dirac;
  std::function<double(double)> f_l, f_h;

  static WeightScheme dirac() { return {}; }
  static WeightScheme uniform(std::function<double(double)> lo,
                              std::function<double(double)> hi);
  // window of the given half width around the optimal-power map, clipped to the
  // admissible power interval
  static WeightScheme uniform_window(double half_width);
};

ActivityEstimate two_step_weighted(const PathSeries& path, const WeightScheme& scheme,
                                   const FsSpec& fs = {}, double conf_level = 0.95);

// Plug-in estimate of the asymptotic variance at power tau.  beta_ts >= 2 uses
// the Gaussian boundary branch (tau <= 1); otherwise 2 tau < beta_ts is
// required (mu_{2 tau} diverges past it).
double feasible_avar(const PVTable& table, double beta_ts, double tau);
double feasible_avar(const PathSeries& path, double beta_ts, double tau);

}  // namespace pja
