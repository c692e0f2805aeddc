#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pja/common.hpp"
#include "pja/rng.hpp"

namespace pja {

// Equidistant observation grid.  n_steps = floor(T / delta_n); the two-scale
// statistics need an even step count, so odd grids are rejected outright.
struct SampleGrid {
  double T = 0.0;
  double delta_n = 0.0;
  std::size_t n_steps = 0;

  SampleGrid(double T, double delta_n);
  static SampleGrid from_steps(double delta_n, std::size_t n_steps);

 private:
  SampleGrid() = default;
};

struct JumpNone {};
struct JumpStable {
  double A = 1.0;
  double beta = 1.5;
};
struct JumpTemperedStable {
  double A = 1.0;
  double beta = 1.5;
  double lambda = 0.25;
};
struct JumpCompoundPoisson {
  double lambda_c = 1.0;  // total arrival rate per unit time
  double r = 1.0;         // jump magnitude, sign a fair coin
};
using JumpSpec = std::variant<JumpNone, JumpStable, JumpTemperedStable, JumpCompoundPoisson>;

// Piecewise-constant jump-scale segment: sigma applies on [t, t_next).
struct VolStep {
  double t = 0.0;
  double sigma = 1.0;
};

// X = sigma1 W + sigma2 J + drift t.  When vol_path is nonempty it replaces the
// scalar sigma2 as the (time-varying) jump scale; breakpoints must sit on the
// sampling grid.
struct ModelSpec {
  double sigma1_sq = 0.0;
  double sigma2 = 0.0;
  JumpSpec jump_kind = JumpNone{};
  double drift = 0.0;
  std::vector<VolStep> vol_path;
};

struct PathSeries {
  SampleGrid grid;
  std::vector<double> values;  // n_steps + 1, values[0] == 0 for simulated paths
  std::uint64_t seed = 0;
};

struct SamplerDiagnostics {
  double cf_match_err = 0.0;  // max |empirical - theoretical| cf over the check grid
  double clipped_mass = 0.0;  // negative density mass removed after inversion
  double tail_mass = 0.0;     // probability mass beyond the tabulated span
};

// Characteristic function of the symmetric tempered stable increment over time
// span t, Levy density A exp(-lambda|x|) |x|^{-beta-1}.  beta = 1 is out of
// scope (the Gamma(-beta) prefactor poles there).
std::function<std::complex<double>(double)> tempered_stable_cf(double A, double beta,
                                                               double lambda, double t);

// Tabulated-inverse-CDF sampler for a symmetric infinitely divisible increment
// law given by its characteristic function.  FFT inversion on a 2^16 grid sized
// from the cf decay (second pass refines the span to the effective support),
// 2^13 inverse-CDF knots, power-law tail extrapolation beyond the knot range.
class IncrementSampler {
 public:
  IncrementSampler(const std::function<std::complex<double>(double)>& cf, double delta_n,
                   double tol);

  double sample(Rng& rng) const { return quantile(rng.u01()); }
  double quantile(double q) const;
  double step() const { return step_; }
  const SamplerDiagnostics& diagnostics() const { return diag_; }

 private:
  double step_ = 0.0;
  double q_lo_ = 0.0, q_hi_ = 0.0, dq_ = 0.0;
  std::vector<double> knots_;
  double left_exp_ = 0.0, right_exp_ = 0.0;  // tail exponents; 0 disables extrapolation
  SamplerDiagnostics diag_;
};

IncrementSampler build_increment_sampler(const std::function<std::complex<double>(double)>& cf,
                                         double delta_n, double tol);

// Per-step compound Poisson jump sums: count ~ Poisson(lambda_c delta_n), each
// jump +r or -r with probability 1/2.
std::vector<double> compound_poisson_increments(double lambda_c, double r,
                                                const SampleGrid& grid, Rng& rng);

// Owns the per-model increment machinery (tempered stable tables are built once
// at construction); immutable afterwards, safe to share across threads.  run()
// derives everything from the seed argument.
class PathSimulator {
 public:
  PathSimulator(const ModelSpec& model, const SampleGrid& grid);

  PathSeries run(std::uint64_t seed) const;
  const SamplerDiagnostics* sampler_diagnostics() const {
    return ts_sampler_ ? &ts_sampler_->diagnostics() : nullptr;
  }

 private:
  ModelSpec model_;
  SampleGrid grid_;
  std::optional<IncrementSampler> ts_sampler_;
  std::vector<double> step_scale_;  // per-step jump scale when vol_path is set
  double stable_unit_ = 0.0;        // (delta_n * Pi)^{1/beta} for stable jumps
};

PathSeries simulate_path(const ModelSpec& model, const SampleGrid& grid, std::uint64_t seed);

// vol_path must be nonempty, start at t = 0, stay positive, and break only on
// grid times.
PathSeries simulate_piecewise_vol(const ModelSpec& model, const SampleGrid& grid,
                                  std::uint64_t seed);

// CSV: header `t,x`, 15 significant digits.  Binary: magic `PJA1`, uint64
// count, double T, double delta_n, then count little-endian doubles.
void write_csv_path(const PathSeries& path, const std::string& file);
void write_binary_path(const PathSeries& path, const std::string& file);
PathSeries read_csv_path(const std::string& file);
PathSeries read_binary_path(const std::string& file);
PathSeries read_path_auto(const std::string& file);  // sniffs the binary magic

}  // namespace pja
