#include "pja/levy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>

#include "pja/fft.hpp"
#include "pja/stable_math.hpp"

namespace pja {
namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr std::size_t kFftN = std::size_t(1) << 16;
constexpr std::size_t kKnotCount = std::size_t(1) << 13;
constexpr double kQEdge = 4e-7;

using CfFn = std::function<std::complex<double>(double)>;

// smallest u with |cf(u)| <= level; cfs handled here have monotone modulus
double cf_decay_point(const CfFn& cf, double level) {
  double lo = 0.0, hi = 1.0;
  while (std::abs(cf(hi)) > level) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e9)
      throw DomainError("increment sampler: characteristic function does not decay below " +
                        std::to_string(level) + " (law with atoms is not representable)");
  }
  for (int it = 0; it < 60 && hi - lo > 1e-6 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::abs(cf(mid)) > level ? lo : hi) = mid;
  }
  return hi;
}

struct GridDensity {
  double dx = 0.0;
  std::vector<double> f;  // density at x_j = (j - N/2) dx, clipped nonnegative
  double clipped = 0.0;
};

// f(x) = (1/pi) int_0^inf cos(ux) cf(u) du, trapezoid in u mapped onto one FFT
GridDensity invert_cf(const CfFn& cf, double dx) {
  const std::size_t n = kFftN;
  const double du = 2.0 * kPi / (dx * static_cast<double>(n));
  std::vector<std::complex<double>> a(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = (k == 0) ? 0.5 : 1.0;
    const double sgn = (k & 1) ? -1.0 : 1.0;
    a[k] = w * sgn * cf(du * static_cast<double>(k)).real();
  }
  fft_pow2(a);
  GridDensity g;
  g.dx = dx;
  g.f.resize(n);
  const double scale = du / kPi;
  for (std::size_t j = 0; j < n; ++j) {
    double v = scale * a[j].real();
    if (v < 0.0) {
      g.clipped += -v * dx;
      v = 0.0;
    }
    g.f[j] = v;
  }
  return g;
}

double node_x(const GridDensity& g, std::size_t j) {
  return (static_cast<double>(j) - static_cast<double>(kFftN) / 2.0) * g.dx;
}

// CDF at the grid nodes, trapezoid masses, off-grid tail split evenly
struct GridCdf {
  std::vector<double> c;  // same length as f, normalized to [tail/2, 1 - tail/2]
  double tail = 0.0;
};

GridCdf cumulative(const GridDensity& g) {
  GridCdf out;
  const std::size_t n = g.f.size();
  out.c.resize(n);
  double run = 0.0;
  out.c[0] = 0.0;
  for (std::size_t j = 1; j < n; ++j) {
    run += 0.5 * (g.f[j - 1] + g.f[j]) * g.dx;
    out.c[j] = run;
  }
  out.tail = std::max(0.0, 1.0 - run);
  const double norm = run + out.tail;
  const double base = 0.5 * out.tail;
  for (auto& v : out.c) v = (base + v) / norm;
  return out;
}

}  // namespace

IncrementSampler::IncrementSampler(const CfFn& cf, double delta_n, double tol) {
  require_domain(delta_n > 0.0, "increment sampler: delta_n must be positive");
  require_domain(tol > 1e-10 && tol < 1e-3, "increment sampler: tol must lie in (1e-10, 1e-3)");
  require_domain(std::abs(cf(0.0) - 1.0) < 1e-9, "increment sampler: cf(0) must be 1");
  step_ = delta_n;

  const double u_star = cf_decay_point(cf, 1e-20);
  GridDensity g = invert_cf(cf, kPi / u_star);
  GridCdf cdf = cumulative(g);

  // second pass: shrink the span to 2.5x the effective support if that means a
  // finer grid
  std::size_t j_lo = 0, j_hi = kFftN - 1;
  while (j_lo + 1 < kFftN && cdf.c[j_lo] < 5e-8) ++j_lo;
  while (j_hi > 0 && cdf.c[j_hi] > 1.0 - 5e-8) --j_hi;
  const double x_eff =
      std::max({std::abs(node_x(g, j_lo)), std::abs(node_x(g, j_hi)), 8.0 * g.dx});
  const double dx2 = 2.5 * x_eff / static_cast<double>(kFftN);
  if (dx2 < g.dx) {
    g = invert_cf(cf, dx2);
    cdf = cumulative(g);
  }

  diag_.clipped_mass = g.clipped;
  diag_.tail_mass = cdf.tail;
  if (g.clipped > tol)
    throw DomainError("increment sampler: negative density mass " + std::to_string(g.clipped) +
                      " exceeds tolerance (grid too coarse for this cf)");

  // inverse-CDF knots on a uniform q-grid, linear interpolation between CDF
  // nodes; a moving pointer keeps extraction linear
  q_lo_ = kQEdge;
  q_hi_ = 1.0 - kQEdge;
  dq_ = (q_hi_ - q_lo_) / static_cast<double>(kKnotCount - 1);
  knots_.resize(kKnotCount);
  std::size_t j = 0;
  for (std::size_t m = 0; m < kKnotCount; ++m) {
    const double q = q_lo_ + dq_ * static_cast<double>(m);
    while (j + 1 < kFftN && cdf.c[j + 1] < q) ++j;
    if (cdf.c[j] >= q) {
      knots_[m] = node_x(g, j);
    } else if (j + 1 >= kFftN) {
      knots_[m] = node_x(g, kFftN - 1);
    } else {
      const double seg = cdf.c[j + 1] - cdf.c[j];
      const double frac = seg > 0.0 ? (q - cdf.c[j]) / seg : 0.0;
      knots_[m] = node_x(g, j) + frac * g.dx;
    }
  }

  // power-law tails fitted to the outermost knot segments
  const double s_b = kQEdge, s_a = kQEdge + dq_;
  const double xr_a = knots_[kKnotCount - 2], xr_b = knots_[kKnotCount - 1];
  if (xr_b > xr_a && xr_a > 0.0) right_exp_ = std::log(s_a / s_b) / std::log(xr_b / xr_a);
  const double xl_a = knots_[0], xl_b = knots_[1];
  if (xl_a < xl_b && xl_b < 0.0) left_exp_ = std::log(s_a / s_b) / std::log(xl_a / xl_b);

  // empirical-vs-theoretical cf on a deterministic quantile point set
  const double u_top = cf_decay_point(cf, 0.05);
  constexpr std::size_t n_q = std::size_t(1) << 16;
  std::vector<double> xs(n_q);
  for (std::size_t i = 0; i < n_q; ++i)
    xs[i] = quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n_q));
  double worst = 0.0;
  for (int k = 1; k <= 64; ++k) {
    const double u = u_top * static_cast<double>(k) / 64.0;
    double re = 0.0, im = 0.0;
    for (const double x : xs) {
      re += std::cos(u * x);
      im += std::sin(u * x);
    }
    re /= static_cast<double>(n_q);
    im /= static_cast<double>(n_q);
    worst = std::max(worst, std::abs(std::complex<double>(re, im) - cf(u)));
  }
  diag_.cf_match_err = worst;
}

double IncrementSampler::quantile(double q) const {
  require_domain(q > 0.0 && q < 1.0, "quantile: q must lie in (0,1)");
  if (q < q_lo_) {
    const double x0 = knots_.front();
    if (left_exp_ > 0.0 && x0 < 0.0) return x0 * std::pow(q_lo_ / q, 1.0 / left_exp_);
    return x0;
  }
  if (q > q_hi_) {
    const double xb = knots_.back();
    if (right_exp_ > 0.0 && xb > 0.0) return xb * std::pow(q_lo_ / (1.0 - q), 1.0 / right_exp_);
    return xb;
  }
  const double pos = (q - q_lo_) / dq_;
  std::size_t i = static_cast<std::size_t>(pos);
  if (i >= kKnotCount - 1) i = kKnotCount - 2;
  const double frac = pos - static_cast<double>(i);
  return knots_[i] + frac * (knots_[i + 1] - knots_[i]);
}

IncrementSampler build_increment_sampler(const CfFn& cf, double delta_n, double tol) {
  return IncrementSampler(cf, delta_n, tol);
}

CfFn tempered_stable_cf(double A, double beta, double lambda, double t) {
  require_domain(A > 0.0, "tempered stable: A must be positive");
  require_domain(beta > 0.0 && beta < 2.0, "tempered stable: beta must lie in (0,2)");
  require_domain(beta != 1.0, "tempered stable: beta = 1 is not supported");
  require_domain(lambda > 0.0, "tempered stable: lambda must be positive");
  require_domain(t > 0.0, "tempered stable: time span must be positive");
  // Gamma(-beta) written without the pole at 0 and 1
  const double g = std::tgamma(2.0 - beta) / (beta * (beta - 1.0));
  const double lam_b = std::pow(lambda, beta);
  return [A, beta, lambda, t, g, lam_b](double u) {
    const double r = std::pow(lambda * lambda + u * u, 0.5 * beta);
    const double psi =
        A * g * (2.0 * r * std::cos(beta * std::atan2(std::abs(u), lambda)) - 2.0 * lam_b);
    return std::complex<double>(std::exp(t * psi), 0.0);
  };
}

SampleGrid::SampleGrid(double T_, double delta_n_) {
  require_domain(T_ > 0.0 && delta_n_ > 0.0, "grid: T and delta_n must be positive");
  T = T_;
  delta_n = delta_n_;
  const double ratio = T_ / delta_n_;
  require_domain(ratio < 9e15, "grid: step count overflows");
  n_steps = static_cast<std::size_t>(std::floor(ratio + 1e-9));
  require_domain(n_steps >= 2, "grid: need at least two steps");
  require_domain(n_steps % 2 == 0, "grid: two-scale statistics need an even step count");
}

SampleGrid SampleGrid::from_steps(double delta_n_, std::size_t n_steps_) {
  require_domain(delta_n_ > 0.0, "grid: delta_n must be positive");
  require_domain(n_steps_ >= 2 && n_steps_ % 2 == 0, "grid: need an even step count >= 2");
  SampleGrid g;
  g.delta_n = delta_n_;
  g.n_steps = n_steps_;
  g.T = delta_n_ * static_cast<double>(n_steps_);
  return g;
}

std::vector<double> compound_poisson_increments(double lambda_c, double r,
                                                const SampleGrid& grid, Rng& rng) {
  require_domain(lambda_c > 0.0 && r > 0.0, "compound poisson: rate and size must be positive");
  std::vector<double> out(grid.n_steps, 0.0);
  const double mean = lambda_c * grid.delta_n;
  for (auto& v : out) {
    const std::uint64_t k = rng.poisson(mean);
    double s = 0.0;
    for (std::uint64_t i = 0; i < k; ++i) s += (rng.u01() < 0.5) ? -r : r;
    v = s;
  }
  return out;
}

PathSimulator::PathSimulator(const ModelSpec& model, const SampleGrid& grid)
    : model_(model), grid_(grid) {
  require_domain(model_.sigma1_sq >= 0.0, "model: sigma1_sq must be nonnegative");
  require_domain(model_.sigma2 >= 0.0, "model: sigma2 must be nonnegative");

  // tempered stable with lambda = 0 is the stable law; route it to the exact
  // sampler instead of the cf pipeline
  if (const auto* ts = std::get_if<JumpTemperedStable>(&model_.jump_kind)) {
    if (ts->lambda == 0.0) model_.jump_kind = JumpStable{ts->A, ts->beta};
    else
      require_domain(ts->lambda > 0.0, "model: tempered stable lambda must be nonnegative");
  }

  const bool has_jump = !std::holds_alternative<JumpNone>(model_.jump_kind);

  if (!model_.vol_path.empty()) {
    require_domain(has_jump, "model: vol_path without a jump component has no effect");
    const auto& vp = model_.vol_path;
    require_domain(std::abs(vp.front().t) <= 1e-12, "vol_path: first breakpoint must be t = 0");
    for (std::size_t i = 0; i < vp.size(); ++i) {
      require_domain(vp[i].sigma > 0.0, "vol_path: sigma must stay positive");
      if (i > 0) require_domain(vp[i].t > vp[i - 1].t, "vol_path: breakpoints must increase");
      const double m = vp[i].t / grid_.delta_n;
      require_domain(std::abs(m - std::round(m)) <= 1e-9 * std::max(1.0, std::abs(m)),
                     "vol_path: breakpoints must lie on the sampling grid");
      require_domain(vp[i].t < grid_.T, "vol_path: breakpoints must lie inside [0, T)");
    }
    step_scale_.resize(grid_.n_steps);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < grid_.n_steps; ++i) {
      const double t = grid_.delta_n * static_cast<double>(i);
      while (seg + 1 < vp.size() && vp[seg + 1].t <= t + 1e-9 * grid_.delta_n) ++seg;
      step_scale_[i] = vp[seg].sigma;
    }
  }

  const bool jump_active = has_jump && (model_.vol_path.empty() ? model_.sigma2 > 0.0 : true);
  require_domain(model_.sigma1_sq > 0.0 || jump_active,
                 "model: needs a Brownian or an active jump component");

  if (const auto* st = std::get_if<JumpStable>(&model_.jump_kind)) {
    stable_unit_ = std::pow(grid_.delta_n * pi_const(st->A, st->beta), 1.0 / st->beta);
  } else if (const auto* ts = std::get_if<JumpTemperedStable>(&model_.jump_kind)) {
    ts_sampler_.emplace(tempered_stable_cf(ts->A, ts->beta, ts->lambda, grid_.delta_n),
                        grid_.delta_n, 1e-4);
  } else if (const auto* cp = std::get_if<JumpCompoundPoisson>(&model_.jump_kind)) {
    require_domain(cp->lambda_c > 0.0 && cp->r > 0.0,
                   "model: compound poisson rate and size must be positive");
  }
}

PathSeries PathSimulator::run(std::uint64_t seed) const {
  PathSeries out{grid_, std::vector<double>(grid_.n_steps + 1, 0.0), seed};
  Rng rng(seed);
  const double dt = grid_.delta_n;
  const double sd1 = std::sqrt(model_.sigma1_sq * dt);
  const double base_drift = model_.drift * dt;

  const auto* st = std::get_if<JumpStable>(&model_.jump_kind);
  const auto* ts = std::get_if<JumpTemperedStable>(&model_.jump_kind);
  const auto* cp = std::get_if<JumpCompoundPoisson>(&model_.jump_kind);
  (void)ts;

  for (std::size_t i = 0; i < grid_.n_steps; ++i) {
    double inc = base_drift;
    if (model_.sigma1_sq > 0.0) inc += sd1 * rng.normal();
    const double scale = step_scale_.empty() ? model_.sigma2 : step_scale_[i];
    if (scale > 0.0) {
      if (st) {
        double z;
        stable_sample(st->beta, 1, rng, &z);
        inc += scale * stable_unit_ * z;
      } else if (ts_sampler_) {
        inc += scale * ts_sampler_->sample(rng);
      } else if (cp) {
        const std::uint64_t k = rng.poisson(cp->lambda_c * dt);
        double s = 0.0;
        for (std::uint64_t m = 0; m < k; ++m) s += (rng.u01() < 0.5) ? -cp->r : cp->r;
        inc += scale * s;
      }
    }
    out.values[i + 1] = out.values[i] + inc;
  }
  return out;
}

PathSeries simulate_path(const ModelSpec& model, const SampleGrid& grid, std::uint64_t seed) {
  return PathSimulator(model, grid).run(seed);
}

PathSeries simulate_piecewise_vol(const ModelSpec& model, const SampleGrid& grid,
                                  std::uint64_t seed) {
  require_domain(!model.vol_path.empty(), "piecewise vol: vol_path must be nonempty");
  return PathSimulator(model, grid).run(seed);
}

void write_csv_path(const PathSeries& path, const std::string& file) {
  std::FILE* f = std::fopen(file.c_str(), "wb");
  if (!f) throw IoError("cannot open for writing: " + file);
  std::fputs("t,x\n", f);
  char buf[80];
  for (std::size_t i = 0; i < path.values.size(); ++i) {
    const double t = path.grid.delta_n * static_cast<double>(i);
    std::snprintf(buf, sizeof(buf), "%.15g,%.15g\n", t, path.values[i]);
    std::fputs(buf, f);
  }
  if (std::fclose(f) != 0) throw IoError("write failed: " + file);
}

void write_binary_path(const PathSeries& path, const std::string& file) {
  std::ofstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + file);
  f.write("PJA1", 4);
  const std::uint64_t count = path.values.size();
  f.write(reinterpret_cast<const char*>(&count), sizeof(count));
  f.write(reinterpret_cast<const char*>(&path.grid.T), sizeof(double));
  f.write(reinterpret_cast<const char*>(&path.grid.delta_n), sizeof(double));
  f.write(reinterpret_cast<const char*>(path.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!f) throw IoError("write failed: " + file);
}

PathSeries read_csv_path(const std::string& file) {
  std::ifstream f(file);
  if (!f) throw IoError("cannot open: " + file);
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty path file: " + file);
  if (line.size() && line.back() == '\r') line.pop_back();
  if (line != "t,x") throw IoError("path csv must start with header t,x: " + file);
  std::vector<double> ts, xs;
  while (std::getline(f, line)) {
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* s = line.c_str();
    char* end = nullptr;
    const double t = std::strtod(s, &end);
    if (end == s || *end != ',') throw IoError("bad path csv row: " + line);
    s = end + 1;
    const double x = std::strtod(s, &end);
    if (end == s) throw IoError("bad path csv row: " + line);
    ts.push_back(t);
    xs.push_back(x);
  }
  if (ts.size() < 3) throw IoError("path csv needs at least three rows: " + file);
  const double dt = ts[1] - ts[0];
  if (!(dt > 0.0)) throw IoError("path csv times must increase: " + file);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double expect = ts[0] + dt * static_cast<double>(i);
    if (std::abs(ts[i] - expect) > 1e-6 * std::max(1.0, std::abs(expect)))
      throw IoError("path csv must be equidistant in t: " + file);
  }
  PathSeries out{SampleGrid::from_steps(dt, ts.size() - 1), std::move(xs), 0};
  return out;
}

PathSeries read_binary_path(const std::string& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot open: " + file);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "PJA1", 4) != 0)
    throw IoError("not a PJA1 binary path: " + file);
  std::uint64_t count = 0;
  double T = 0.0, dt = 0.0;
  f.read(reinterpret_cast<char*>(&count), sizeof(count));
  f.read(reinterpret_cast<char*>(&T), sizeof(T));
  f.read(reinterpret_cast<char*>(&dt), sizeof(dt));
  if (!f || count < 3 || count > (std::uint64_t(1) << 40))
    throw IoError("bad PJA1 header: " + file);
  std::vector<double> xs(count);
  f.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!f) throw IoError("truncated PJA1 payload: " + file);
  SampleGrid grid(T, dt);
  if (grid.n_steps != count - 1) throw IoError("inconsistent PJA1 header: " + file);
  for (const double v : xs)
    if (!std::isfinite(v)) throw IoError("non-finite value in path: " + file);
  return PathSeries{grid, std::move(xs), 0};
}

PathSeries read_path_auto(const std::string& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot open: " + file);
  char magic[4] = {0, 0, 0, 0};
  f.read(magic, 4);
  f.close();
  if (std::memcmp(magic, "PJA1", 4) == 0) return read_binary_path(file);
  return read_csv_path(file);
}

}  // namespace pja
