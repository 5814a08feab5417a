#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace hpcaas::rankmsg {

/// One point-to-point message as it travels between ranks.
///
/// Wire layout (all integers big-endian):
///
///   offset  size  field
///   0       4     magic "RMSG" (0x52 0x4D 0x53 0x47)
///   4       4     src rank
///   8       4     dst rank
///   12      4     tag
///   16      4     payload_len
///   20      n     payload
struct Envelope {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint32_t tag = 0;
  std::string payload;

  bool operator==(const Envelope&) const = default;
};

inline constexpr std::array<std::uint8_t, 4> kMagic = {0x52, 0x4D, 0x53, 0x47};
inline constexpr std::size_t kHeaderSize = 20;
inline constexpr std::uint32_t kMaxPayload = 64u << 20;

// Tags at or above this value carry runtime control traffic.
inline constexpr std::uint32_t kFirstReservedTag = 0xFFFFFF00u;
inline constexpr std::uint32_t kHelloTag = 0xFFFFFFFFu;
inline constexpr std::uint32_t kFinTag = 0xFFFFFFFEu;
inline constexpr std::uint32_t kReleaseTag = 0xFFFFFFFDu;

struct Header {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint32_t tag = 0;
  std::uint32_t payload_len = 0;
};

std::string encode(const Envelope& envelope);

/// Throws Error(Transport) on a bad magic or an oversized length.
Header decode_header(std::span<const std::uint8_t, kHeaderSize> bytes);

/// Decodes exactly one complete frame; trailing or missing bytes are errors.
Envelope decode(std::span<const std::uint8_t> frame);

inline Envelope decode(std::string_view frame) {
  return decode(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(frame.data()), frame.size()));
}

}  // namespace hpcaas::rankmsg
