#include "hpcaas/rankmsg/envelope.hpp"

#include <algorithm>

#include "hpcaas/error.hpp"

namespace hpcaas::rankmsg {

namespace {

void put_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

std::uint32_t get_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

}  // namespace

std::string encode(const Envelope& envelope) {
  if (envelope.payload.size() > kMaxPayload) {
    fail(ErrorCode::Usage, "payload of " + std::to_string(envelope.payload.size()) +
                               " bytes exceeds the frame limit");
  }
  if (envelope.src == envelope.dst) {
    fail(ErrorCode::Usage, "envelope source and destination are both rank " +
                               std::to_string(envelope.src));
  }
  std::string out;
  out.reserve(kHeaderSize + envelope.payload.size());
  out.append(reinterpret_cast<const char*>(kMagic.data()), kMagic.size());
  put_be32(out, envelope.src);
  put_be32(out, envelope.dst);
  put_be32(out, envelope.tag);
  put_be32(out, static_cast<std::uint32_t>(envelope.payload.size()));
  out += envelope.payload;
  return out;
}

Header decode_header(std::span<const std::uint8_t, kHeaderSize> bytes) {
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    fail(ErrorCode::Transport, "frame has bad magic");
  }
  Header h{get_be32(&bytes[4]), get_be32(&bytes[8]), get_be32(&bytes[12]), get_be32(&bytes[16])};
  if (h.src == h.dst) fail(ErrorCode::Transport, "frame addressed to its own source");
  if (h.payload_len > kMaxPayload) {
    fail(ErrorCode::Transport, "frame payload length " + std::to_string(h.payload_len) +
                                   " exceeds the limit");
  }
  return h;
}

Envelope decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < kHeaderSize) fail(ErrorCode::Transport, "truncated frame header");
  const Header h = decode_header(frame.first<kHeaderSize>());
  if (frame.size() != kHeaderSize + h.payload_len) {
    fail(ErrorCode::Transport, "frame length does not match payload_len");
  }
  const auto payload = frame.subspan(kHeaderSize);
  return {h.src, h.dst, h.tag,
          std::string(reinterpret_cast<const char*>(payload.data()), payload.size())};
}

}  // namespace hpcaas::rankmsg
