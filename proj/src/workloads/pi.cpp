#include "hpcaas/workloads/pi.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "hpcaas/error.hpp"

using nlohmann::json;

namespace hpcaas::workloads {

namespace {

std::string shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string fixed3(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  return buf;
}

}  // namespace

std::vector<std::uint64_t> partition(std::uint64_t max_tries, std::uint32_t size) {
  if (size == 0) fail(ErrorCode::Validation, "partition over zero ranks");
  std::vector<std::uint64_t> counts(size, max_tries / size);
  const std::uint64_t extra = max_tries % size;
  for (std::uint64_t r = 0; r < extra; ++r) ++counts[r];
  return counts;
}

PiParams PiParams::from_json(const json& params) {
  if (!params.is_null() && !params.is_object()) {
    fail(ErrorCode::Validation, "pi params must be a JSON object");
  }
  PiParams p;
  for (const char* key : {"max_tries", "seed"}) {
    if (params.contains(key) && !params.at(key).is_number_unsigned()) {
      fail(ErrorCode::Validation, std::string("pi param ") + key + " must be an unsigned integer");
    }
  }
  if (params.contains("max_tries")) p.max_tries = params.at("max_tries").get<std::uint64_t>();
  if (params.contains("seed")) p.seed = params.at("seed").get<std::uint64_t>();
  if (p.max_tries < 1) fail(ErrorCode::Validation, "max_tries must be >= 1");
  return p;
}

json PiParams::to_json() const { return {{"max_tries", max_tries}, {"seed", seed}}; }

std::string encode_u64(std::uint64_t value) {
  std::string out(8, '\0');
  for (int i = 7; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<char>(value & 0xff);
    value >>= 8;
  }
  return out;
}

std::uint64_t decode_u64(std::string_view bytes) {
  if (bytes.size() != 8) {
    fail(ErrorCode::Transport, "expected an 8-byte count, got " + std::to_string(bytes.size()));
  }
  std::uint64_t v = 0;
  for (unsigned char c : bytes) v = (v << 8) | c;
  return v;
}

int pi_rank_body(rankmsg::RankContext& ctx, const PiParams& params) {
  const auto start = std::chrono::steady_clock::now();
  const auto counts = partition(params.max_tries, ctx.size());

  UnitSquareSampler sampler(params.seed + ctx.rank());
  const std::uint64_t hits = count_hits(sampler, counts[ctx.rank()]);

  if (ctx.rank() != 0) {
    ctx.send(0, encode_u64(hits));
    return 0;
  }

  PiReport report;
  report.total_hits = hits;
  for (std::uint32_t r = 1; r < ctx.size(); ++r) report.total_hits += decode_u64(ctx.recv(r));
  for (auto c : counts) report.total_samples += c;
  report.estimate = estimate_pi(report.total_hits, report.total_samples);
  report.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  ctx.out() << format_pi_report(report) << std::flush;
  return 0;
}

std::string format_pi_report(const PiReport& report) {
  return "Total Hits = " + std::to_string(report.total_hits) + "\n" +
         "Total Tries = " + std::to_string(report.total_samples) + "\n" +
         "Approx pi = " + shortest(report.estimate) + "\n" +
         "Time (ms) = " + fixed3(report.elapsed_ms) + "\n";
}

std::optional<PiReport> parse_pi_report(std::string_view output) {
  PiReport report;
  int seen = 0;
  std::istringstream in{std::string(output)};
  std::string line;
  auto value_after = [&](std::string_view prefix) -> std::optional<std::string> {
    if (line.rfind(prefix, 0) != 0) return std::nullopt;
    return line.substr(prefix.size());
  };
  try {
    while (std::getline(in, line)) {
      if (auto v = value_after("Total Hits = ")) {
        report.total_hits = std::stoull(*v);
        seen |= 1;
      } else if (auto v = value_after("Total Tries = ")) {
        report.total_samples = std::stoull(*v);
        seen |= 2;
      } else if (auto v = value_after("Approx pi = ")) {
        report.estimate = std::stod(*v);
        seen |= 4;
      } else if (auto v = value_after("Time (ms) = ")) {
        report.elapsed_ms = std::stod(*v);
        seen |= 8;
      }
    }
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (seen != 15) return std::nullopt;
  return report;
}

}  // namespace hpcaas::workloads
