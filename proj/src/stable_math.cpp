#include "pja/stable_math.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <tuple>

#include "pja/common.hpp"
#include "pja/halton.hpp"
#include "pja/normal.hpp"
#include "pja/parallel.hpp"
#include "pja/quadrature.hpp"

namespace pja {

namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2 = 1.41421356237309504880;

double cms_map(double beta, double theta, double e) {
  if (beta == 1.0) return std::tan(theta);
  const double bt = beta * theta;
  return std::sin(bt) / std::pow(std::cos(theta), 1.0 / beta) *
         std::pow(std::cos(theta - bt) / e, (1.0 - beta) / beta);
}

// ln|Z1|, ln|Z1+Z2| over a fixed 4-d Halton point set (bases 2,3,5,7).
// Logs are clamped below so a grid point landing exactly on the median of a
// coordinate cannot produce -inf; the induced bias is ~1e-8 in any moment.
struct PairLogs {
  std::vector<double> l1, l12;
  std::size_t n = 0;
};

constexpr double kLogClamp = -50.0;

std::shared_ptr<const PairLogs> build_pair_logs(double beta, std::size_t n) {
  auto out = std::make_shared<PairLogs>();
  out->n = n;
  out->l1.resize(n);
  out->l12.resize(n);
  double* l1 = out->l1.data();
  double* l12 = out->l12.data();
  parallel_chunks(n, 8192, [&](std::size_t, std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const Halton4 h(i + 1);
      double z1, z2;
      if (beta >= 2.0) {
        z1 = norm_quantile(h.u[0]);
        z2 = norm_quantile(h.u[1]);
      } else {
        z1 = cms_map(beta, kPi * (h.u[0] - 0.5), -std::log(h.u[1]));
        z2 = cms_map(beta, kPi * (h.u[2] - 0.5), -std::log(h.u[3]));
      }
      l1[i] = std::max(std::log(std::abs(z1)), kLogClamp);
      l12[i] = std::max(std::log(std::abs(z1 + z2)), kLogClamp);
    }
  });
  return out;
}

// cache of pair-log sets keyed on (beta, n); readers share, duplicate builds of
// a fresh key are tolerated (results are deterministic, last insert wins)
struct PairKey {
  std::int64_t beta_r;
  std::size_t n;
  bool operator<(const PairKey& o) const { return std::tie(beta_r, n) < std::tie(o.beta_r, o.n); }
};

std::shared_ptr<const PairLogs> get_pair_logs(double beta, std::size_t n) {
  static std::mutex mu;
  static std::map<PairKey, std::shared_ptr<const PairLogs>> cache;
  static std::deque<PairKey> order;
  const PairKey key{static_cast<std::int64_t>(std::llround(beta * 1e6)), n};
  {
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto built = build_pair_logs(beta, n);
  std::lock_guard<std::mutex> lk(mu);
  auto [it, inserted] = cache.emplace(key, built);
  if (!inserted) return it->second;
  order.push_back(key);
  // bound resident memory: large sets are the expensive ones
  std::size_t big = 0;
  for (const auto& kv : cache)
    if (kv.second->n >= kQmcPointsNode) ++big;
  for (auto ot = order.begin(); ot != order.end() && (cache.size() > 64 || big > 3);) {
    auto ct = cache.find(*ot);
    if (ct != cache.end() && !(ct->first.beta_r == key.beta_r && ct->first.n == key.n)) {
      if (ct->second->n >= kQmcPointsNode) --big;
      cache.erase(ct);
      ot = order.erase(ot);
    } else {
      ++ot;
    }
  }
  return built;
}

// D-form cross-moment correction: mu_pq = mu_{p+q} + E[e^{p L1 + q L12} - e^{(p+q) L1}].
// The two exponentials share points, so the heavy-tail mass cancels termwise and
// the QMC error stays bounded over the whole admissible (p, q) range.
double mu_pq_correction(const PairLogs& pl, double p, double q) {
  const std::size_t n = pl.n;
  const double* l1 = pl.l1.data();
  const double* l12 = pl.l12.data();
  const double d = parallel_sum(n, 4096, [&](std::size_t i) {
    return std::exp(p * l1[i] + q * l12[i]) - std::exp((p + q) * l1[i]);
  });
  return d / static_cast<double>(n);
}

// binned mgf summaries of S = L1 + L12 and B = L1 for fast diagonal kernel
// evaluations during the optimal-power search
struct BinnedMgf {
  double lo = 0.0, h = 0.02;
  std::vector<double> cnt, mean, var;
  double n = 0.0;

  void build(const std::vector<double>& xs) {
    double mn = xs[0], mx = xs[0];
    for (double x : xs) {
      mn = std::min(mn, x);
      mx = std::max(mx, x);
    }
    lo = std::floor(mn / h) * h;
    const std::size_t nb = static_cast<std::size_t>((mx - lo) / h) + 2;
    std::vector<double> c(nb, 0.0), s(nb, 0.0), s2(nb, 0.0);
    for (double x : xs) {
      const std::size_t b = static_cast<std::size_t>((x - lo) / h);
      const double d = x - (lo + (static_cast<double>(b) + 0.5) * h);
      c[b] += 1.0;
      s[b] += d;
      s2[b] += d * d;
    }
    cnt.clear();
    mean.clear();
    var.clear();
    centers_.clear();
    for (std::size_t b = 0; b < nb; ++b) {
      if (c[b] == 0.0) continue;
      cnt.push_back(c[b]);
      centers_.push_back(lo + (static_cast<double>(b) + 0.5) * h);
      const double m = s[b] / c[b];
      mean.push_back(m);
      var.push_back(std::max(0.0, s2[b] / c[b] - m * m));
    }
    n = static_cast<double>(xs.size());
  }

  // E[e^{a X}] with a second-order within-bin expansion
  double mgf(double a) const {
    double total = 0.0;
    for (std::size_t b = 0; b < cnt.size(); ++b) {
      const double am = a * mean[b];
      total += cnt[b] * std::exp(a * centers_[b]) * (1.0 + am + 0.5 * (am * am + a * a * var[b]));
    }
    return total / n;
  }

 private:
  std::vector<double> centers_;
};

struct DiagMgf {
  BinnedMgf s, b;
  void build(const PairLogs& pl) {
    std::vector<double> sums(pl.n);
    for (std::size_t i = 0; i < pl.n; ++i) sums[i] = pl.l1[i] + pl.l12[i];
    s.build(sums);
    b.build(pl.l1);
  }
  // mu_{p,p} - mu_{2p}
  double correction(double p) const { return s.mgf(p) - b.mgf(2.0 * p); }
};

double k_from_moments(double p, double q, double beta, double m_p, double m_q, double m_pq_sum,
                      double m_cross_pq, double m_cross_qp) {
  const double pref = beta * beta * beta * beta / (kLn2 * kLn2 * p * q * m_p * m_q);
  const double bracket = 3.0 * m_pq_sum + m_p * m_q - std::pow(2.0, 1.0 - p / beta) * m_cross_pq -
                         std::pow(2.0, 1.0 - q / beta) * m_cross_qp;
  return pref * bracket;
}

void check_power_domain(double p, double q, double beta) {
  require_domain(beta > 0.0 && beta <= 2.0, "k_kernel: beta must lie in (0,2]");
  if (beta >= 2.0) {
    require_domain(p > 0.0 && q > 0.0 && p <= 1.0 && q <= 1.0,
                   "k_kernel: powers must lie in (0,1] at beta = 2");
  } else {
    require_domain(p > 0.0 && q > 0.0 && 2.0 * p < beta && 2.0 * q < beta,
                   "k_kernel: powers must lie in (0, beta/2)");
  }
}

double golden_min(const std::function<double(double)>& f, double a, double b, double tol) {
  const double gr = 0.61803398874989484820;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

PowerChoice optimal_power_impl(double beta, std::size_t n_points, const PairLogs* ext_pairs) {
  require_domain(beta >= PowerMap::kBetaLo && beta <= PowerMap::kBetaHi,
                 "optimal_power: beta must lie in [0.2, 2]");
  if (beta >= 2.0) {
    PowerChoice out;
    out.p = 1.0;
    out.k_value = k_kernel(1.0, 1.0, 2.0, n_points);
    out.clamped = false;
    return out;
  }
  std::shared_ptr<const PairLogs> hold;
  const PairLogs* pairs = ext_pairs;
  if (!pairs) {
    hold = get_pair_logs(beta, n_points);
    pairs = hold.get();
  }
  DiagMgf diag;
  diag.build(*pairs);

  auto k_at = [&](double p) {
    const double m_p = mu_p(p, beta);
    const double m_2p = mu_p(2.0 * p, beta);
    const double m_pp = m_2p + diag.correction(p);
    return k_from_moments(p, p, beta, m_p, m_p, m_2p, m_pp, m_pp);
  };

  const double lo = 0.05;
  const double hi = power_upper_cap(beta);
  require_domain(hi > lo, "optimal_power: admissible interval is empty");
  const int grid_n = 200;
  int best = 0;
  double best_k = 0.0;
  std::vector<double> ps(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    ps[i] = lo + (hi - lo) * static_cast<double>(i) / (grid_n - 1);
    const double k = k_at(ps[i]);
    if (i == 0 || k < best_k) {
      best_k = k;
      best = i;
    }
  }
  const double a = ps[std::max(0, best - 1)];
  const double b = ps[std::min(grid_n - 1, best + 1)];
  double p_star = golden_min(k_at, a, b, 1e-4);

  PowerChoice out;
  out.clamped = false;
  const double lb = power_lower_bound(beta);
  if (p_star < lb) {
    p_star = std::min(lb, hi);
    out.clamped = true;
  }
  out.p = p_star;
  out.k_value = k_at(p_star);
  return out;
}

}  // namespace

double power_upper_cap(double beta) { return beta >= 2.0 ? 1.0 : beta / 2.0 - 0.01; }

double power_lower_bound(double beta) {
  // the admissibility bound only constrains the jump case above sqrt(2);
  // below that the generic 0.05 floor applies
  if (beta >= 2.0 || beta <= kSqrt2) return 0.05;
  const double bound = std::max((2.0 - beta) / (2.0 * (beta - 1.0)), (beta - 1.0) / 2.0);
  return std::max(0.05, std::min(bound, power_upper_cap(beta)));
}

double mu_p(double p, double beta) {
  require_domain(p >= 0.0, "mu_p: p must be nonnegative");
  require_domain(beta > 0.0 && beta <= 2.0, "mu_p: beta must lie in (0,2]");
  if (p == 0.0) return 1.0;
  if (beta >= 2.0) {
    // E|N(0,1)|^p
    return std::exp(0.5 * p * kLn2 + std::lgamma(0.5 * (p + 1.0)) - std::lgamma(0.5));
  }
  require_domain(p < beta, "mu_p: p must satisfy p < beta");
  const double lg = p * kLn2 + std::lgamma(0.5 * (p + 1.0)) + std::lgamma(1.0 - p / beta) -
                    std::lgamma(0.5) - std::lgamma(1.0 - 0.5 * p);
  return std::exp(lg);
}

double mu_pq(double p, double q, double beta, std::size_t n_points) {
  require_domain(p >= 0.0 && q >= 0.0, "mu_pq: powers must be nonnegative");
  require_domain(beta > 0.0 && beta <= 2.0, "mu_pq: beta must lie in (0,2]");
  if (beta < 2.0) require_domain(p + q < beta, "mu_pq: p + q must be below beta");

  struct Key {
    std::int64_t p_r, q_r, beta_r;
    std::size_t n;
    bool operator<(const Key& o) const {
      return std::tie(p_r, q_r, beta_r, n) < std::tie(o.p_r, o.q_r, o.beta_r, o.n);
    }
  };
  static std::shared_mutex memo_mu;
  static std::map<Key, double> memo;
  const Key key{std::llround(p * 1e6), std::llround(q * 1e6), std::llround(beta * 1e6), n_points};
  {
    std::shared_lock<std::shared_mutex> lk(memo_mu);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
  }
  const auto pairs = get_pair_logs(beta, n_points);
  const double value = mu_p(p + q, beta) + mu_pq_correction(*pairs, p, q);
  std::unique_lock<std::shared_mutex> lk(memo_mu);
  memo.emplace(key, value);
  return value;
}

PiConstant::PiConstant(double A_, double beta_) : A(A_), beta(beta_) {
  require_domain(A > 0.0, "pi_const: A must be positive");
  require_domain(beta > 0.0 && beta < 2.0, "pi_const: beta must lie in (0,2)");
  // I(beta) = Gamma(2-beta)/beta * sin(pi(1-beta)/2)/(1-beta), stable through beta = 1
  const double t = 1.0 - beta;
  const double sinc = std::abs(t) < 1e-12 ? 0.5 * kPi : std::sin(0.5 * kPi * t) / t;
  const double integral = std::tgamma(2.0 - beta) / beta * sinc;
  value = 2.0 * A * integral;
  const double quad = one_minus_cos_power_integral(beta, 1e-10);
  require_domain(std::abs(quad - integral) <= 1e-8 * std::max(1.0, std::abs(integral)),
                 "pi_const: closed form failed quadrature cross-check");
}

double pi_const(double A, double beta) { return PiConstant(A, beta).value; }

std::array<std::array<double, 2>, 2> clt_cov_matrix(double p, double q, double beta) {
  require_domain(p > 0.0 && q > 0.0, "clt_cov_matrix: powers must be positive");
  require_domain(beta > 0.0 && beta <= 2.0, "clt_cov_matrix: beta must lie in (0,2]");
  if (beta < 2.0) require_domain(p + q < beta, "clt_cov_matrix: p + q must be below beta");
  const double m_p = mu_p(p, beta);
  const double m_q = mu_p(q, beta);
  const double m_sum = mu_p(p + q, beta);
  const double cross_pq = mu_pq(p, q, beta);  // E|Z1|^p |Z1+Z2|^q
  const double cross_qp = mu_pq(q, p, beta);
  std::array<std::array<double, 2>, 2> out;
  out[0][0] = std::pow(2.0, (p + q) / beta - 1.0) * (m_sum - m_p * m_q);
  out[0][1] = cross_qp - std::pow(2.0, p / beta) * m_p * m_q;
  out[1][0] = cross_pq - std::pow(2.0, q / beta) * m_p * m_q;
  out[1][1] = m_sum - m_p * m_q;
  return out;
}

double k_kernel(double p, double q, double beta, std::size_t n_points) {
  check_power_domain(p, q, beta);
  const double m_p = mu_p(p, beta);
  const double m_q = mu_p(q, beta);
  const double m_sum = mu_p(p + q, beta);
  // 2^{1-p/beta} pairs with E|Z1|^q |Z1+Z2|^p, i.e. mu_pq with arguments (q, p)
  const double cross_qp = mu_pq(q, p, beta, n_points);
  const double cross_pq = mu_pq(p, q, beta, n_points);
  return k_from_moments(p, q, beta, m_p, m_q, m_sum, cross_qp, cross_pq);
}

PowerChoice optimal_power(double beta, std::size_t n_points) {
  return optimal_power_impl(beta, n_points, nullptr);
}

void stable_sample(double beta, std::size_t n, Rng& rng, double* out) {
  require_domain(beta > 0.0 && beta <= 2.0, "stable_sample: beta must lie in (0,2]");
  if (beta >= 2.0) {
    for (std::size_t i = 0; i < n; ++i) out[i] = rng.normal();
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = kPi * (rng.u01() - 0.5);
    out[i] = cms_map(beta, theta, rng.exponential());
  }
}

std::vector<double> stable_sample(double beta, std::size_t n, std::uint64_t seed) {
  std::vector<double> out(n);
  Rng rng(seed);
  stable_sample(beta, n, rng, out.data());
  return out;
}

struct PowerMap::Impl {
  std::once_flag flags[kNodes];
  PowerChoice nodes[kNodes];

  static double node_beta(int i) {
    return i == kNodes - 1 ? kBetaHi
                           : kBetaLo + (kBetaHi - kBetaLo) * static_cast<double>(i) / (kNodes - 1);
  }

  void ensure(int i) {
    std::call_once(flags[i], [this, i] {
      const double beta = node_beta(i);
      if (beta >= 2.0) {
        // exact branch at the boundary node
        PowerChoice pc;
        pc.p = 1.0;
        pc.k_value = k_kernel(1.0, 1.0, 2.0, kQmcPointsNode);
        pc.clamped = false;
        nodes[i] = pc;
        return;
      }
      const auto pairs = build_pair_logs(beta, kQmcPointsNode);
      nodes[i] = optimal_power_impl(beta, kQmcPointsNode, pairs.get());
    });
  }
};

PowerMap& PowerMap::instance() {
  static PowerMap m;
  return m;
}

PowerMap::Impl* PowerMap::impl() {
  static Impl impl;
  return &impl;
}

void PowerMap::prebuild(unsigned workers) {
  Impl* im = impl();
  parallel_chunks(
      kNodes, 1, [&](std::size_t, std::size_t i0, std::size_t) { im->ensure(static_cast<int>(i0)); },
      workers);
}

PowerChoice PowerMap::at(double beta) {
  require_domain(beta >= kBetaLo && beta <= kBetaHi, "PowerMap: beta must lie in [0.2, 2]");
  Impl* im = impl();
  const double step = (kBetaHi - kBetaLo) / (kNodes - 1);
  int i = static_cast<int>((beta - kBetaLo) / step);
  i = std::clamp(i, 0, kNodes - 2);
  im->ensure(i);
  im->ensure(i + 1);
  const double b0 = Impl::node_beta(i);
  const double w = std::clamp((beta - b0) / step, 0.0, 1.0);
  const PowerChoice& n0 = im->nodes[i];
  const PowerChoice& n1 = im->nodes[i + 1];
  PowerChoice out;
  const double p_raw = (1.0 - w) * n0.p + w * n1.p;
  out.k_value = (1.0 - w) * n0.k_value + w * n1.k_value;
  out.p = std::clamp(p_raw, power_lower_bound(beta), power_upper_cap(beta));
  out.clamped = (std::abs(out.p - p_raw) > 1e-9) || n0.clamped || n1.clamped;
  return out;
}

}  // namespace pja
