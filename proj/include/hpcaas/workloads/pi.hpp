#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hpcaas/rankmsg/context.hpp"
#include "json.hpp"

namespace hpcaas::workloads {

/// Splits `max_tries` samples over `size` ranks. Counts sum to max_tries and
/// differ by at most one; the first max_tries % size ranks take the extra.
std::vector<std::uint64_t> partition(std::uint64_t max_tries, std::uint32_t size);

struct PiParams {
  std::uint64_t max_tries = 10'000'000;
  std::uint64_t seed = 42;  // rank r draws from seed + r

  static PiParams from_json(const nlohmann::json& params);
  nlohmann::json to_json() const;
};

struct PiReport {
  std::uint64_t total_hits = 0;
  std::uint64_t total_samples = 0;
  double estimate = 0.0;
  double elapsed_ms = 0.0;
};

/// Uniform points in [0,1)^2 from a per-rank mt19937_64 stream.
class UnitSquareSampler {
 public:
  explicit UnitSquareSampler(std::uint64_t seed) : engine_(seed) {}

  std::pair<double, double> operator()() {
    const double x = unit(engine_());
    const double y = unit(engine_());
    return {x, y};
  }

  // Top 53 bits scaled into [0, 1).
  static double unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

/// Samples `count` points and counts those with x^2 + y^2 <= 1 (the same
/// test as sqrt(x^2 + y^2) <= 1 without the root).
template <typename PointSource>
std::uint64_t count_hits(PointSource& source, std::uint64_t count) {
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto [x, y] = source();
    if (x * x + y * y <= 1.0) ++hits;
  }
  return hits;
}

inline double estimate_pi(std::uint64_t hits, std::uint64_t samples) {
  return samples == 0 ? 0.0 : 4.0 * static_cast<double>(hits) / static_cast<double>(samples);
}

/// Workload "montecarlo_pi". Every rank samples its partition share; ranks
/// above 0 send their hit count to rank 0, which adds its own, receives from
/// ranks 1..size-1 in order and prints the report.
int pi_rank_body(rankmsg::RankContext& ctx, const PiParams& params);

/// The four report lines: Total Hits, Total Tries, Approx pi, Time (ms).
std::string format_pi_report(const PiReport& report);
std::optional<PiReport> parse_pi_report(std::string_view output);

/// 8-byte big-endian encoding used for counts on the wire.
std::string encode_u64(std::uint64_t value);
std::uint64_t decode_u64(std::string_view bytes);

}  // namespace hpcaas::workloads
