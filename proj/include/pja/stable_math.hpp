#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pja/rng.hpp"

namespace pja {

// Default quasi-Monte-Carlo point counts.  Direct moment/kernel calls run at
// full resolution; the interpolated optimal-power map trades one decimal of
// node accuracy for an order of magnitude in build time.
inline constexpr std::size_t kQmcPointsFull = std::size_t(1) << 22;
inline constexpr std::size_t kQmcPointsNode = std::size_t(1) << 20;

// E|Z|^p for standard symmetric beta-stable Z (standard normal at beta = 2).
// Requires 0 < p < beta when beta < 2; any p > 0 when beta = 2.
double mu_p(double p, double beta);

// Cross moment E|Z1|^p |Z1+Z2|^q for iid standard symmetric beta-stable Z1, Z2.
// Requires p + q < beta when beta < 2.  Memoized on (p, q, beta) rounded to 1e-6.
double mu_pq(double p, double q, double beta, std::size_t n_points = kQmcPointsFull);

// Scale constant 2A * integral (1-cos x) x^{-beta-1}; Pi(1/pi, 1) = 1 convention
// falls out of the closed form.  Every construction re-verifies the closed form
// against adaptive quadrature to 1e-8.
struct PiConstant {
  double A;
  double beta;
  double value;
  PiConstant(double A, double beta);
};
double pi_const(double A, double beta);

// Asymptotic covariance of the centered two-scale PV pair; first index is the
// coarse scale.  At p != q this is the cross-covariance between the pair
// evaluated at p and the pair evaluated at q, so it is not symmetric there.
std::array<std::array<double, 2>, 2> clt_cov_matrix(double p, double q, double beta);

// Covariance kernel K_{p,q}(beta) of the b-statistic across powers.
double k_kernel(double p, double q, double beta, std::size_t n_points = kQmcPointsFull);

struct PowerChoice {
  double p = 0.0;
  double k_value = 0.0;
  bool clamped = false;
};

// argmin_p K_{p,p}(beta) over the admissible interval, with the admissibility
// lower bound enforced upward (flagged) where it binds.  beta in [0.2, 2].
PowerChoice optimal_power(double beta, std::size_t n_points = kQmcPointsFull);

// Exact CMS draws (standard normal draws at beta = 2).
void stable_sample(double beta, std::size_t n, Rng& rng, double* out);
std::vector<double> stable_sample(double beta, std::size_t n, std::uint64_t seed);

// Piecewise-linear interpolation of optimal_power over a fixed beta grid with
// lazily computed, memoized nodes.  Evaluations re-apply the exact clamps so
// the returned power is always admissible at the requested beta.
class PowerMap {
 public:
  static PowerMap& instance();
  PowerChoice at(double beta);
  void prebuild(unsigned workers = 0);

  static constexpr double kBetaLo = 0.2;
  static constexpr double kBetaHi = 2.0;
  static constexpr int kNodes = 145;  // 0.0125 spacing

 private:
  PowerMap() = default;
  struct Impl;
  Impl* impl();
};

// Admissible-interval helpers shared by optimal_power and the estimators.
double power_upper_cap(double beta);    // beta/2 - 0.01 (1.0 at beta = 2)
double power_lower_bound(double beta);  // admissibility bound, 0.05 floor below sqrt(2)

}  // namespace pja
