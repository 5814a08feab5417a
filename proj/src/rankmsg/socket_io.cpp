#include "socket_io.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <thread>

#include "hpcaas/error.hpp"

namespace hpcaas::rankmsg::detail {

namespace {

struct SockAddr {
  sockaddr_storage storage{};
  socklen_t length = 0;
  int family = AF_INET;
};

SockAddr resolve(const Endpoint& ep) {
  SockAddr out;
  if (ep.host.find(':') != std::string::npos) {
    auto* a = reinterpret_cast<sockaddr_in6*>(&out.storage);
    a->sin6_family = AF_INET6;
    a->sin6_port = htons(ep.port);
    if (inet_pton(AF_INET6, ep.host.c_str(), &a->sin6_addr) != 1) {
      fail(ErrorCode::Usage, "bad IPv6 host " + ep.host);
    }
    out.length = sizeof(sockaddr_in6);
    out.family = AF_INET6;
  } else {
    auto* a = reinterpret_cast<sockaddr_in*>(&out.storage);
    a->sin_family = AF_INET;
    a->sin_port = htons(ep.port);
    if (inet_pton(AF_INET, ep.host.c_str(), &a->sin_addr) != 1) {
      fail(ErrorCode::Usage, "bad IPv4 host " + ep.host);
    }
    out.length = sizeof(sockaddr_in);
  }
  return out;
}

[[noreturn]] void sys_fail(const std::string& what) {
  fail(ErrorCode::Transport, what + ": " + std::strerror(errno));
}

}  // namespace

Fd& Fd::operator=(Fd&& other) noexcept {
  if (this != &other) {
    reset();
    fd_ = other.release();
  }
  return *this;
}

void Fd::reset() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

Fd listen_on(const Endpoint& endpoint, int backlog) {
  const SockAddr addr = resolve(endpoint);
  Fd fd(::socket(addr.family, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd) sys_fail("socket");
  const int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&addr.storage), addr.length) != 0) {
    sys_fail("bind " + to_string(endpoint));
  }
  if (::listen(fd.get(), backlog) != 0) sys_fail("listen");
  return fd;
}

std::uint16_t local_port(int fd) {
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) sys_fail("getsockname");
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

std::optional<Fd> dial(const Endpoint& endpoint, std::chrono::steady_clock::time_point deadline,
                       bool retry) {
  const SockAddr addr = resolve(endpoint);
  auto backoff = std::chrono::milliseconds(5);
  for (;;) {
    Fd fd(::socket(addr.family, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd) sys_fail("socket");
    if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr.storage), addr.length) == 0) {
      const int one = 1;
      ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return fd;
    }
    const int err = errno;
    if (err == EINTR) continue;
    if (err != ECONNREFUSED && err != ECONNRESET && err != ETIMEDOUT) {
      errno = err;
      sys_fail("connect " + to_string(endpoint));
    }
    if (!retry) return std::nullopt;
    if (std::chrono::steady_clock::now() + backoff > deadline) {
      fail(ErrorCode::Transport, "could not reach " + to_string(endpoint) + " before the deadline");
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, std::chrono::milliseconds(200));
  }
}

bool write_all(int fd, const void* data, std::size_t size) {
  const auto* p = static_cast<const char*>(data);
  while (size > 0) {
    const ssize_t n = ::send(fd, p, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_exact(int fd, void* data, std::size_t size) {
  auto* p = static_cast<char*>(data);
  while (size > 0) {
    const ssize_t n = ::recv(fd, p, size, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    p += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<Envelope> read_envelope(int fd) {
  std::array<std::uint8_t, kHeaderSize> header;
  if (!read_exact(fd, header.data(), header.size())) return std::nullopt;
  const Header h = decode_header(header);
  Envelope e{h.src, h.dst, h.tag, std::string(h.payload_len, '\0')};
  if (h.payload_len > 0 && !read_exact(fd, e.payload.data(), h.payload_len)) return std::nullopt;
  return e;
}

}  // namespace hpcaas::rankmsg::detail
