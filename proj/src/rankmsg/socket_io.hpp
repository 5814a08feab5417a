#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "hpcaas/rankmsg/endpoints.hpp"
#include "hpcaas/rankmsg/envelope.hpp"

namespace hpcaas::rankmsg::detail {

/// Owning file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& other) noexcept : fd_(other.release()) {}
  Fd& operator=(Fd&& other) noexcept;
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  int release() noexcept {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void reset() noexcept;
  explicit operator bool() const noexcept { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

/// Listening TCP socket on `host` with an ephemeral port (port 0) or a fixed one.
Fd listen_on(const Endpoint& endpoint, int backlog = 64);
std::uint16_t local_port(int fd);

/// Connects, retrying refusals until `deadline` when `retry` is set.
/// Throws Error(Transport) on other failures or when the deadline passes.
std::optional<Fd> dial(const Endpoint& endpoint, std::chrono::steady_clock::time_point deadline,
                       bool retry);

bool write_all(int fd, const void* data, std::size_t size);

/// false on orderly EOF before `size` bytes or on error.
bool read_exact(int fd, void* data, std::size_t size);

/// Reads one frame; nullopt on EOF/error. Throws Error(Transport) on a
/// malformed frame.
std::optional<Envelope> read_envelope(int fd);

}  // namespace hpcaas::rankmsg::detail
