#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "pja/normal.hpp"
#include "pja/power_variation.hpp"
#include "pja/stable_math.hpp"

using namespace pja;

namespace {

PathSeries make_path(double delta_n, std::vector<double> values) {
  return PathSeries{SampleGrid::from_steps(delta_n, values.size() - 1), std::move(values), 0};
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("constant-increment path evaluates in closed form") {
  const double c = 0.25;
  const std::size_t n = 1000;
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = static_cast<double>(i) * c;
  const PathSeries p = make_path(0.1, std::move(vals));
  for (const double pw : {0.4, 1.0, 1.7}) {
    const double fine = realized_pv(p, pw, 1);
    const double coarse = realized_pv(p, pw, 2);
    CHECK(fine == doctest::Approx(static_cast<double>(n) * std::pow(c, pw)).epsilon(1e-12));
    CHECK(coarse ==
          doctest::Approx(static_cast<double>(n / 2) * std::pow(2.0 * c, pw)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(realized_pv(p, -0.5, 1), DomainError);
  CHECK_THROWS_AS(realized_pv(p, 0.5, 3), DomainError);
}

TEST_CASE("p = 2 recovers brownian quadratic variation") {
  ModelSpec m;
  m.sigma1_sq = 1.0;
  const SampleGrid grid = SampleGrid::from_steps(1e-4, 100000);
  const PathSeries path = simulate_path(m, grid, 99181);
  const double qv = realized_pv(path, 2.0, 2);
  const double se = 2.0 * grid.delta_n * std::sqrt(2.0 * static_cast<double>(grid.n_steps / 2));
  CHECK(std::abs(qv - grid.T) <= 4.0 * se);
}

TEST_CASE("scaled power variation approaches the stable limit") {
  const double beta = 1.5, p = 0.6;
  ModelSpec m;
  m.sigma2 = 1.0;
  m.jump_kind = JumpStable{1.0 / pi_const(1.0, beta), beta};
  const SampleGrid grid(22.0, 1.0 / 2000.0);
  const PathSimulator sim(m, grid);
  double acc = 0.0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    const PathSeries path = sim.run(derive_seed(4242, 1, static_cast<std::uint64_t>(r)));
    acc += std::pow(grid.delta_n, 1.0 - p / beta) * realized_pv(path, p, 1);
  }
  acc /= reps;
  const double limit = grid.T * mu_p(p, beta);
  CHECK(std::abs(acc - limit) <= 0.02 * limit);
}

TEST_CASE("table agrees with per-call evaluation bit for bit") {
  ModelSpec m;
  m.sigma1_sq = 0.8;
  const PathSeries path = simulate_path(m, SampleGrid::from_steps(1.0 / 390.0, 8580), 5);

  const PVTable single = pv_table(path, {0.6});
  CHECK(single.values_fine[0] == realized_pv(path, 0.6, 1));
  CHECK(single.values_coarse[0] == realized_pv(path, 0.6, 2));

  std::vector<double> grid50(50);
  for (int i = 0; i < 50; ++i) grid50[i] = 0.1 + (0.95 - 0.1) * i / 49.0;
  const PVTable table = pv_table(path, grid50);
  for (int i = 0; i < 50; ++i) {
    CHECK(table.values_fine[i] == realized_pv(path, grid50[i], 1));
    CHECK(table.values_coarse[i] == realized_pv(path, grid50[i], 2));
  }

  double best = 1e9;
  for (int trial = 0; trial < 3; ++trial) {
    const auto t0 = std::chrono::steady_clock::now();
    const PVTable timed = pv_table(path, grid50);
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    CHECK(timed.values_fine[7] == table.values_fine[7]);
  }
  CHECK(best < 0.050);

  CHECK_THROWS_AS(pv_table(path, {}), DomainError);
  CHECK_THROWS_AS(pv_table(path, {0.5, -0.1}), DomainError);
}

TEST_CASE("homogeneity and translation invariance") {
  ModelSpec m;
  m.sigma1_sq = 0.5;
  const PathSeries path = simulate_path(m, SampleGrid::from_steps(0.01, 2000), 17);

  const double c = -3.0;
  PathSeries scaled = path;
  for (auto& v : scaled.values) v *= c;
  for (const double p : {0.3, 0.8, 1.6}) {
    for (const int s : {1, 2}) {
      const double lhs = realized_pv(scaled, p, s);
      const double rhs = std::pow(std::abs(c), p) * realized_pv(path, p, s);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }

  // dyadic path and shift keep every float operation exact
  std::vector<double> vals(501);
  Rng rng(3);
  double run = 0.0;
  for (auto& v : vals) {
    run += std::ldexp(static_cast<double>(static_cast<int>(rng.next_u64() % 128) - 64), -10);
    v = run;
  }
  const PathSeries dy = make_path(0.5, std::move(vals));
  PathSeries shifted = dy;
  for (auto& v : shifted.values) v += 4.25;
  for (const double p : {0.5, 1.2})
    for (const int s : {1, 2}) CHECK(realized_pv(shifted, p, s) == realized_pv(dy, p, s));
}

TEST_CASE("b ratio identity, flags and scale invariance") {
  const double beta = 1.5, p = 0.6;
  const double vf = 3.7;
  const double vc = std::pow(2.0, p / beta - 1.0) * vf;
  const BPoint ident = b_from_values(vf, vc, p);
  REQUIRE(ident.valid);
  CHECK(ident.b == doctest::Approx(beta).epsilon(1e-12));

  CHECK_FALSE(b_from_values(0.0, 1.0, p).valid);
  CHECK_FALSE(b_from_values(1.0, 0.0, p).valid);
  CHECK_FALSE(b_from_values(2.0, 1.0 + 1e-14, p).valid);  // denominator ~ 0 at vc = vf/2

  std::vector<double> flat(101, 1.0);
  const PathSeries zero = make_path(0.1, std::move(flat));
  CHECK_FALSE(b_ratio(zero, 0.5).valid);

  ModelSpec m;
  m.sigma1_sq = 0.8;
  const PathSeries path = simulate_path(m, SampleGrid::from_steps(1.0 / 390.0, 4000), 23);
  const BPoint base = b_ratio(path, 0.1);
  REQUIRE(base.valid);
  PathSeries scaled = path;
  for (auto& v : scaled.values) v *= 41.0;
  const BPoint sc = b_ratio(scaled, 0.1);
  REQUIRE(sc.valid);
  CHECK(std::abs(sc.b - base.b) <= 1e-10);

  const PVTable table = pv_table(path, {0.1, 0.5});
  CHECK(b_ratio(table, 0.5).valid);
  CHECK(b_ratio(table, 0.1).b == base.b);
  CHECK_THROWS_AS(b_ratio(table, 0.123), DomainError);

  const BFunction bf = b_function(table);
  CHECK(bf.b_values[0] == base.b);
  CHECK(bf.valid[0]);
}

TEST_CASE("brownian-only b(0.1) median sits at two") {
  ModelSpec m;
  m.sigma1_sq = 0.8;
  const SampleGrid grid(22.0, 1.0 / 390.0);
  const PathSimulator sim(m, grid);
  std::vector<double> bs;
  bs.reserve(1000);
  for (int r = 0; r < 1000; ++r) {
    const BPoint bp = b_ratio(sim.run(derive_seed(909, 3, static_cast<std::uint64_t>(r))), 0.1);
    if (bp.valid) bs.push_back(bp.b);
  }
  REQUIRE(bs.size() >= 995);
  CHECK(std::abs(median_of(bs) - 2.0005) <= 0.02);
}

TEST_CASE("truncated counts") {
  std::vector<double> small(201);
  for (std::size_t i = 0; i < small.size(); ++i) small[i] = 1e-8 * static_cast<double>(i);
  const PathSeries tiny = make_path(0.25, std::move(small));
  CHECK(truncated_count(tiny, 1.0, 1) == 0);
  CHECK(truncated_count(tiny, 1.0, 2) == 0);

  std::vector<double> big(201);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = 10.0 * static_cast<double>(i);
  const PathSeries loud = make_path(0.25, std::move(big));
  CHECK(truncated_count(loud, 1.0, 1) == 200);
  CHECK(truncated_count(loud, 1.0, 2) == 100);

  ModelSpec m;
  m.sigma1_sq = 0.8;
  const SampleGrid grid = SampleGrid::from_steps(1.0 / 390.0, 100000);
  const PathSeries path = simulate_path(m, grid, 808);
  const double p_hit = 2.0 * (1.0 - norm_cdf(1.0 / std::sqrt(0.8)));
  for (const int s : {1, 2}) {
    const double n = static_cast<double>(grid.n_steps / static_cast<std::size_t>(s));
    const double got = static_cast<double>(truncated_count(path, 1.0, s));
    CHECK(std::abs(got / n - p_hit) <= 4.0 * std::sqrt(p_hit * (1.0 - p_hit) / n));
  }
  CHECK_THROWS_AS(truncated_count(path, 0.0, 1), DomainError);
}

TEST_CASE("log derivative matches finite differences") {
  ModelSpec m;
  m.sigma1_sq = 0.8;
  m.sigma2 = 1.0;
  m.jump_kind = JumpCompoundPoisson{1.0 / 3.0, 0.7746};
  const PathSeries path = simulate_path(m, SampleGrid::from_steps(1.0 / 390.0, 8580), 55);
  const double h = 1e-4;
  for (const double p : {0.3, 0.9}) {
    for (const int s : {1, 2}) {
      const double fd = (realized_pv(path, p + h, s) - realized_pv(path, p - h, s)) / (2.0 * h);
      const double an = pv_logderiv(path, p, s);
      CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("csv exports") {
  ModelSpec m;
  m.sigma1_sq = 0.8;
  const PathSeries path = simulate_path(m, SampleGrid::from_steps(0.01, 100), 2);
  const PVTable table = pv_table(path, {0.1, 0.6});
  write_pv_csv(table, "pv.csv");
  write_b_csv(b_function(table), "bf.csv");

  std::ifstream pv("pv.csv");
  std::string line;
  std::getline(pv, line);
  CHECK(line == "p,v_fine,v_coarse");
  std::getline(pv, line);
  double a = 0.0, b = 0.0, c = 0.0;
  CHECK(std::sscanf(line.c_str(), "%lf,%lf,%lf", &a, &b, &c) == 3);
  CHECK(a == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(b == doctest::Approx(table.values_fine[0]).epsilon(1e-14));

  std::ifstream bf("bf.csv");
  std::getline(bf, line);
  CHECK(line == "p,b,valid");
  std::getline(bf, line);
  int valid = -1;
  CHECK(std::sscanf(line.c_str(), "%lf,%lf,%d", &a, &b, &valid) == 3);
  CHECK(valid == 1);

  CHECK_THROWS_AS(write_pv_csv(table, "/nonexistent_dir_zz/pv.csv"), IoError);
  std::remove("pv.csv");
  std::remove("bf.csv");
}
