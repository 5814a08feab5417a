#include "hpcaas/workloads/schedule.hpp"

#include "hpcaas/error.hpp"

using nlohmann::json;

namespace hpcaas::workloads {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

ScheduleParams ScheduleParams::from_json(const json& params) {
  if (!params.is_null() && !params.is_object()) {
    fail(ErrorCode::Validation, "schedule params must be a JSON object");
  }
  ScheduleParams p;
  try {
    if (params.is_null()) return p;
    if (params.contains("seed")) p.seed = params.at("seed").get<std::uint64_t>();
    if (params.contains("max_messages")) p.max_messages = params.at("max_messages").get<std::uint32_t>();
    if (params.contains("max_payload")) p.max_payload = params.at("max_payload").get<std::uint32_t>();
    if (params.contains("jitter_us")) p.jitter_us = params.at("jitter_us").get<std::uint32_t>();
  } catch (const json::exception&) {
    fail(ErrorCode::Validation, "schedule params must be unsigned integers");
  }
  if (p.max_messages > 10'000 || p.max_payload > (1u << 20)) {
    fail(ErrorCode::Validation, "schedule params too large");
  }
  return p;
}

MessageSchedule::MessageSchedule(const ScheduleParams& params, std::uint32_t size)
    : params_(params), size_(size) {}

std::uint64_t MessageSchedule::mix(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                                   std::uint64_t d) const {
  std::uint64_t h = splitmix64(params_.seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return splitmix64(h ^ d);
}

std::uint32_t MessageSchedule::count(std::uint32_t src, std::uint32_t dst) const {
  if (src == dst || src >= size_ || dst >= size_) return 0;
  return static_cast<std::uint32_t>(mix(1, src, dst, 0) % (params_.max_messages + 1ull));
}

std::uint32_t MessageSchedule::tag(std::uint32_t src, std::uint32_t dst, std::uint32_t k) const {
  return static_cast<std::uint32_t>(mix(2, src, dst, k) % 3);
}

std::string MessageSchedule::payload(std::uint32_t src, std::uint32_t dst, std::uint32_t k) const {
  std::uint64_t state = mix(3, src, dst, k);
  const std::size_t length = state % (params_.max_payload + 1ull);
  std::string out(length, '\0');
  for (std::size_t i = 0; i < length; ++i) {
    state = splitmix64(state);
    out[i] = static_cast<char>(state & 0xff);
  }
  // Sequence number up front where it fits, so equal-tag neighbours differ.
  for (std::size_t i = 0; i < 4 && i < length; ++i) {
    out[i] = static_cast<char>((k >> (24 - 8 * i)) & 0xff);
  }
  return out;
}

std::uint64_t MessageSchedule::total() const {
  std::uint64_t sum = 0;
  for (std::uint32_t s = 0; s < size_; ++s) {
    for (std::uint32_t d = 0; d < size_; ++d) sum += count(s, d);
  }
  return sum;
}

}  // namespace hpcaas::workloads
