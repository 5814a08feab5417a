#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace hpcaas::workloads {

struct ScheduleParams {
  std::uint64_t seed = 1;
  std::uint32_t max_messages = 16;  // per ordered (src, dst) pair
  std::uint32_t max_payload = 64;   // bytes; 0-length payloads included
  std::uint32_t jitter_us = 0;

  static ScheduleParams from_json(const nlohmann::json& params);
};

/// Deterministic traffic plan shared by every rank of a "message_schedule"
/// job: how many messages each ordered pair exchanges and what each one
/// carries. Both ends derive the same plan from the seed.
class MessageSchedule {
 public:
  MessageSchedule(const ScheduleParams& params, std::uint32_t size);

  std::uint32_t count(std::uint32_t src, std::uint32_t dst) const;
  std::uint32_t tag(std::uint32_t src, std::uint32_t dst, std::uint32_t k) const;
  std::string payload(std::uint32_t src, std::uint32_t dst, std::uint32_t k) const;
  std::uint64_t total() const;

 private:
  std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) const;

  ScheduleParams params_;
  std::uint32_t size_;
};

}  // namespace hpcaas::workloads
