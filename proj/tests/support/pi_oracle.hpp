#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hpcaas::testing {

// Straight-line Monte Carlo pi with no messaging and none of the library's
// sampling code: rank r's share drawn from mt19937_64(seed + r), the hit
// test in its square-root form.
struct OracleResult {
  std::uint64_t hits = 0;
  std::uint64_t samples = 0;
  double estimate = 0.0;
};

inline OracleResult pi_oracle(std::uint64_t max_tries, std::uint32_t size, std::uint64_t seed) {
  OracleResult out;
  for (std::uint32_t r = 0; r < size; ++r) {
    std::uint64_t share = max_tries / size;
    if (r < max_tries % size) share += 1;
    std::mt19937_64 engine(seed + r);
    for (std::uint64_t i = 0; i < share; ++i) {
      const double x = std::ldexp(static_cast<double>(engine() >> 11), -53);
      const double y = std::ldexp(static_cast<double>(engine() >> 11), -53);
      const double dist = std::sqrt(x * x + y * y);
      if (dist <= 1.0) ++out.hits;
    }
    out.samples += share;
  }
  out.estimate = 4.0 * static_cast<double>(out.hits) / static_cast<double>(out.samples);
  return out;
}

}  // namespace hpcaas::testing
