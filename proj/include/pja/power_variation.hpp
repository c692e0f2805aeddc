#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pja/levy_sim.hpp"

namespace pja {

// Realized power variation at both sampling scales for a power grid.
struct PVTable {
  std::vector<double> powers;
  std::vector<double> values_fine;    // V_T(p, X, delta_n)
  std::vector<double> values_coarse;  // V_T(p, X, 2 delta_n)
  SampleGrid grid;
};

struct BPoint {
  double b = 0.0;
  bool valid = false;
};

struct BFunction {
  std::vector<double> powers;
  std::vector<double> b_values;
  std::vector<bool> valid;
};

// scale 1 sums |X_i - X_{i-1}|^p over floor(T/delta_n) increments; scale 2
// skip-samples from index 0 and discards a trailing odd increment.
double realized_pv(const PathSeries& path, double p, int scale);

// Both scales for every power in one pass over the increments; matches
// realized_pv bit for bit.
PVTable pv_table(const PathSeries& path, const std::vector<double>& powers);

// b = ln2 p / (ln2 + ln V_coarse - ln V_fine).  Degenerate denominators and
// zero variations come back flagged, not thrown.
BPoint b_from_values(double v_fine, double v_coarse, double p);
BPoint b_ratio(const PVTable& table, double p);  // p must be present in the table
BPoint b_ratio(const PathSeries& path, double p);
BFunction b_function(const PVTable& table);

// Count of increments with |delta X| >= alpha sqrt(scale delta_n).
std::size_t truncated_count(const PathSeries& path, double alpha, int scale);

// d/dp of realized_pv: sum |delta|^p ln|delta| over nonzero increments.
double pv_logderiv(const PathSeries& path, double p, int scale);

void write_pv_csv(const PVTable& table, const std::string& file);   // p,v_fine,v_coarse
void write_b_csv(const BFunction& bf, const std::string& file);     // p,b,valid

}  // namespace pja
