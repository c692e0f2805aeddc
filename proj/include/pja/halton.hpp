#pragma once

#include <cstdint>

namespace pja {

// Radical-inverse (van der Corput) value of index i in the given base.
// Index 0 maps to 0, so callers should start at i = 1.
inline double radical_inverse(std::uint64_t i, std::uint32_t base) {
  if (base == 2) {
    // bit reversal of the 53 significant bits
    std::uint64_t v = i;
    v = ((v >> 1) & 0x5555555555555555ULL) | ((v & 0x5555555555555555ULL) << 1);
    v = ((v >> 2) & 0x3333333333333333ULL) | ((v & 0x3333333333333333ULL) << 2);
    v = ((v >> 4) & 0x0F0F0F0F0F0F0F0FULL) | ((v & 0x0F0F0F0F0F0F0F0FULL) << 4);
    v = ((v >> 8) & 0x00FF00FF00FF00FFULL) | ((v & 0x00FF00FF00FF00FFULL) << 8);
    v = ((v >> 16) & 0x0000FFFF0000FFFFULL) | ((v & 0x0000FFFF0000FFFFULL) << 16);
    v = (v >> 32) | (v << 32);
    return static_cast<double>(v >> 11) * 0x1.0p-53;
  }
  const double inv_base = 1.0 / static_cast<double>(base);
  double f = inv_base;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv_base;
  }
  return r;
}

// 4-dimensional Halton point (bases 2,3,5,7), clamped away from {0,1} so the
// coordinates are safe inside inverse-CDF and CMS maps.
struct Halton4 {
  double u[4];
  explicit Halton4(std::uint64_t i) {
    static constexpr std::uint32_t bases[4] = {2, 3, 5, 7};
    for (int d = 0; d < 4; ++d) {
      double v = radical_inverse(i, bases[d]);
      if (v < 1e-15) v = 1e-15;
      if (v > 1.0 - 1e-15) v = 1.0 - 1e-15;
      u[d] = v;
    }
  }
};

}  // namespace pja
