#include "pja/power_variation.hpp"

#include <cmath>
#include <cstdio>

namespace pja {
namespace {

constexpr double kLn2 = 0.69314718055994530941723212145818;

void check_scale(int scale) {
  require_domain(scale == 1 || scale == 2, "power variation: scale must be 1 or 2");
}

std::size_t increment_count(const PathSeries& path, int scale) {
  const std::size_t n = path.values.size() - 1;
  return scale == 1 ? n : n / 2;
}

}  // namespace

double realized_pv(const PathSeries& path, double p, int scale) {
  require_domain(p > 0.0, "power variation: p must be positive");
  check_scale(scale);
  require_domain(path.values.size() >= 3, "power variation: path too short");
  const std::size_t m = increment_count(path, scale);
  const std::size_t s = static_cast<std::size_t>(scale);
  double acc = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    const double d = path.values[i * s] - path.values[(i - 1) * s];
    acc += std::pow(std::abs(d), p);
  }
  return acc;
}

PVTable pv_table(const PathSeries& path, const std::vector<double>& powers) {
  require_domain(!powers.empty(), "pv_table: powers must be nonempty");
  for (const double p : powers) require_domain(p > 0.0, "pv_table: powers must be positive");
  require_domain(path.values.size() >= 3, "pv_table: path too short");

  PVTable out{powers, std::vector<double>(powers.size(), 0.0),
              std::vector<double>(powers.size(), 0.0), path.grid};
  const std::size_t nf = increment_count(path, 1);
  const std::size_t k = powers.size();
  for (std::size_t i = 1; i <= nf; ++i) {
    const double d = std::abs(path.values[i] - path.values[i - 1]);
    for (std::size_t j = 0; j < k; ++j) out.values_fine[j] += std::pow(d, powers[j]);
  }
  const std::size_t nc = increment_count(path, 2);
  for (std::size_t i = 1; i <= nc; ++i) {
    const double d = std::abs(path.values[2 * i] - path.values[2 * i - 2]);
    for (std::size_t j = 0; j < k; ++j) out.values_coarse[j] += std::pow(d, powers[j]);
  }
  return out;
}

BPoint b_from_values(double v_fine, double v_coarse, double p) {
  require_domain(p > 0.0, "b ratio: p must be positive");
  if (!(v_fine > 0.0) || !(v_coarse > 0.0)) return {0.0, false};
  const double den = kLn2 + std::log(v_coarse) - std::log(v_fine);
  if (std::abs(den) < 1e-12) return {0.0, false};
  return {kLn2 * p / den, true};
}

BPoint b_ratio(const PVTable& table, double p) {
  for (std::size_t j = 0; j < table.powers.size(); ++j) {
    if (std::abs(table.powers[j] - p) <= 1e-12 * std::max(1.0, std::abs(p)))
      return b_from_values(table.values_fine[j], table.values_coarse[j], table.powers[j]);
  }
  throw DomainError("b ratio: power not present in the table");
}

BPoint b_ratio(const PathSeries& path, double p) {
  return b_from_values(realized_pv(path, p, 1), realized_pv(path, p, 2), p);
}

BFunction b_function(const PVTable& table) {
  BFunction out;
  out.powers = table.powers;
  out.b_values.resize(table.powers.size());
  out.valid.resize(table.powers.size());
  for (std::size_t j = 0; j < table.powers.size(); ++j) {
    const BPoint bp =
        b_from_values(table.values_fine[j], table.values_coarse[j], table.powers[j]);
    out.b_values[j] = bp.b;
    out.valid[j] = bp.valid;
  }
  return out;
}

std::size_t truncated_count(const PathSeries& path, double alpha, int scale) {
  require_domain(alpha > 0.0, "truncated count: alpha must be positive");
  check_scale(scale);
  require_domain(path.values.size() >= 3, "truncated count: path too short");
  const double threshold = alpha * std::sqrt(static_cast<double>(scale) * path.grid.delta_n);
  const std::size_t m = increment_count(path, scale);
  const std::size_t s = static_cast<std::size_t>(scale);
  std::size_t count = 0;
  for (std::size_t i = 1; i <= m; ++i) {
    const double d = path.values[i * s] - path.values[(i - 1) * s];
    if (std::abs(d) >= threshold) ++count;
  }
  return count;
}

double pv_logderiv(const PathSeries& path, double p, int scale) {
  require_domain(p > 0.0, "pv logderiv: p must be positive");
  check_scale(scale);
  require_domain(path.values.size() >= 3, "pv logderiv: path too short");
  const std::size_t m = increment_count(path, scale);
  const std::size_t s = static_cast<std::size_t>(scale);
  double acc = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    const double d = std::abs(path.values[i * s] - path.values[(i - 1) * s]);
    if (d > 0.0) acc += std::pow(d, p) * std::log(d);
  }
  return acc;
}

void write_pv_csv(const PVTable& table, const std::string& file) {
  std::FILE* f = std::fopen(file.c_str(), "wb");
  if (!f) throw IoError("cannot open for writing: " + file);
  std::fputs("p,v_fine,v_coarse\n", f);
  char buf[120];
  for (std::size_t j = 0; j < table.powers.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.15g,%.15g,%.15g\n", table.powers[j],
                  table.values_fine[j], table.values_coarse[j]);
    std::fputs(buf, f);
  }
  if (std::fclose(f) != 0) throw IoError("write failed: " + file);
}

void write_b_csv(const BFunction& bf, const std::string& file) {
  std::FILE* f = std::fopen(file.c_str(), "wb");
  if (!f) throw IoError("cannot open for writing: " + file);
  std::fputs("p,b,valid\n", f);
  char buf[100];
  for (std::size_t j = 0; j < bf.powers.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.15g,%.15g,%d\n", bf.powers[j], bf.b_values[j],
                  bf.valid[j] ? 1 : 0);
    std::fputs(buf, f);
  }
  if (std::fclose(f) != 0) throw IoError("write failed: " + file);
}

}  // namespace pja
