#pragma once

#include <cmath>
#include <functional>

#include "pja/common.hpp"

namespace pja {

namespace detail {

// Gauss-Kronrod 15(7) nodes/weights on [-1,1]
inline constexpr double gk_x[8] = {
    0.0,
    0.2077849550078984676006894037732449,
    0.4058451513773971669066064120769615,
    0.5860872354676911302941448382587296,
    0.7415311855993944398638647732807884,
    0.8648644233597690727897127886409262,
    0.9491079123427585245261896840478513,
    0.9914553711208126392068546975263285};
inline constexpr double gk_wk[8] = {
    0.2094821410847278280129991748917143,
    0.2044329400752988924141619992346491,
    0.1903505780647854099132564024210137,
    0.1690047266392679028265834265985503,
    0.1406532597155259187451895905102379,
    0.1047900103222501838398763225415180,
    0.0630920926299785532907006631892042,
    0.0229353220105292249637320080589695};
inline constexpr double gk_wg[4] = {
    0.4179591836734693877551020408163265,
    0.3818300505051189449503697754889751,
    0.2797053914892766679014677714237796,
    0.1294849661688696932706114326790820};

template <class F>
void gk15(const F& f, double a, double b, double& result, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double f0 = f(c);
  double resk = gk_wk[0] * f0;
  double resg = gk_wg[0] * f0;
  for (int j = 1; j < 8; ++j) {
    const double fl = f(c - h * gk_x[j]);
    const double fr = f(c + h * gk_x[j]);
    resk += gk_wk[j] * (fl + fr);
    if (j % 2 == 0) resg += gk_wg[j / 2] * (fl + fr);
  }
  result = resk * h;
  err = std::abs((resk - resg) * h);
}

}  // namespace detail

// Adaptive bisection on GK15.  Plain recursion with a depth cap; accuracy use
// here is cross-checking closed forms, not performance-critical paths.
template <class F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10, int max_depth = 18) {
  std::function<double(double, double, double, int)> rec = [&](double lo, double hi, double tol,
                                                               int depth) -> double {
    double r, e;
    detail::gk15(f, lo, hi, r, e);
    if (e <= tol || depth >= max_depth) return r;
    const double mid = 0.5 * (lo + hi);
    return rec(lo, mid, 0.5 * tol, depth + 1) + rec(mid, hi, 0.5 * tol, depth + 1);
  };
  require_domain(a < b, "integrate: empty interval");
  return rec(a, b, abs_tol, 0);
}

// integral of (1 - cos x) x^{-1-beta} over (0, inf), beta in (0,2).
// [0,1]: term-by-term series (handles the x^{1-beta} endpoint, which defeats
// plain bisection as beta -> 2); [1, cut]: adaptive panels; beyond cut: a
// two-term integration-by-parts asymptotic for the oscillatory remainder.
inline double one_minus_cos_power_integral(double beta, double abs_tol = 1e-10) {
  require_domain(beta > 0.0 && beta < 2.0, "one_minus_cos_power_integral: beta in (0,2)");
  const double two_pi = 6.283185307179586476925286766559;
  const double cut = two_pi * 2000.0;

  double total = 0.0;
  double fact = 1.0;  // (2m)!
  for (int m = 1; m <= 20; ++m) {
    fact *= static_cast<double>(2 * m - 1) * static_cast<double>(2 * m);
    const double term = 1.0 / (fact * (static_cast<double>(2 * m) - beta));
    total += (m % 2 == 1) ? term : -term;
    if (term < 1e-18) break;
  }

  auto f = [beta](double x) {
    const double s = std::sin(0.5 * x);
    return 2.0 * s * s * std::pow(x, -1.0 - beta);
  };
  total += integrate(f, 1.0, two_pi, abs_tol * 0.2);
  double lo = two_pi;
  while (lo < cut) {
    const double hi = std::min(lo * 2.0, cut);
    total += integrate(f, lo, hi, abs_tol * 0.2, 22);
    lo = hi;
  }
  // tail: int_X (1-cos) = X^{-beta}/beta - int_X cos x * x^{-1-beta}
  //       int_X cos x * x^{-1-beta} = -sin(X) X^{-1-beta} + (1+beta)cos(X) X^{-2-beta} + O(X^{-3-beta})
  const double X = cut;
  total += std::pow(X, -beta) / beta + std::sin(X) * std::pow(X, -1.0 - beta) -
           (1.0 + beta) * std::cos(X) * std::pow(X, -2.0 - beta);
  return total;
}

}  // namespace pja
