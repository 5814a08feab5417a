#include "hpcaas/rankmsg/context.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fcntl.h>

#include <iostream>

#include "hpcaas/error.hpp"
#include "socket_io.hpp"

namespace hpcaas::rankmsg {

struct RankContext::Outgoing {
  detail::Fd fd;
  std::mutex write_mutex;
};

// A peer is definitely gone once the stream it writes to us has ended (all
// its frames precede that EOF), or when it never connected to us and our own
// connection to it dropped.
bool RankContext::is_dead(const PeerState& peer) {
  return peer.incoming == Link::Closed || (peer.monitor_closed && peer.incoming == Link::None);
}

RankContext::RankContext(RankConfig config) : config_(std::move(config)) {
  if (config_.size == 0) fail(ErrorCode::Usage, "job size must be >= 1");
  if (config_.rank >= config_.size) {
    fail(ErrorCode::Usage, "rank " + std::to_string(config_.rank) + " outside job of size " +
                               std::to_string(config_.size));
  }
  if (config_.endpoints.size() != config_.size) {
    fail(ErrorCode::Usage, "endpoint table lists " + std::to_string(config_.endpoints.size()) +
                               " ranks but the job size is " + std::to_string(config_.size));
  }
  if (config_.out == nullptr) config_.out = &std::cout;
  peers_.assign(config_.size, PeerState{});

  if (config_.listen_fd >= 0) {
    listen_fd_ = config_.listen_fd;
  } else {
    listen_fd_ = detail::listen_on(config_.endpoints[config_.rank]).release();
  }
  ::fcntl(listen_fd_, F_SETFD, FD_CLOEXEC);
  if (::pipe2(wake_pipe_, O_CLOEXEC) != 0) fail(ErrorCode::Transport, "pipe2 failed");
  acceptor_ = std::thread([this] { accept_loop(); });

  if (config_.rank != 0) {
    try {
      outgoing(0);
    } catch (...) {
      shutdown_all();
      throw;
    }
  }
}

RankContext::~RankContext() { shutdown_all(); }

void RankContext::shutdown_all() {
  {
    std::lock_guard lock(mutex_);
    if (stopping_) return;
    stopping_ = true;
    for (int fd : incoming_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  {
    std::lock_guard lock(outgoing_mutex_);
    for (auto& [dst, o] : outgoing_) ::shutdown(o->fd.get(), SHUT_RDWR);
  }
  arrived_.notify_all();
  const char byte = 'x';
  [[maybe_unused]] auto n = ::write(wake_pipe_[1], &byte, 1);
  if (acceptor_.joinable()) acceptor_.join();

  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mutex_);
    threads.swap(threads_);
  }
  for (auto& t : threads) t.join();

  for (int fd : incoming_fds_) ::close(fd);
  incoming_fds_.clear();
  outgoing_.clear();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
  ::close(wake_pipe_[0]);
  ::close(wake_pipe_[1]);
}

std::string RankContext::hello_payload() const {
  return config_.job_token + "\n" + format_endpoint_table(config_.endpoints);
}

void RankContext::check_peer(std::uint32_t peer, const char* what) const {
  if (peer >= config_.size) {
    fail(ErrorCode::Usage, std::string(what) + " rank " + std::to_string(peer) +
                               " outside job of size " + std::to_string(config_.size));
  }
  if (peer == config_.rank) {
    fail(ErrorCode::Usage, std::string(what) + " rank is this process's own rank " +
                               std::to_string(peer));
  }
}

RankContext::Outgoing& RankContext::outgoing(std::uint32_t dst) {
  std::lock_guard lock(outgoing_mutex_);
  if (auto it = outgoing_.find(dst); it != outgoing_.end()) return *it->second;

  const auto deadline = std::chrono::steady_clock::now() + config_.connect_deadline;
  auto fd = detail::dial(config_.endpoints[dst], deadline, !config_.peers_prebound);
  if (!fd) {
    mark_gone(dst);
    fail(ErrorCode::Transport, "rank " + std::to_string(dst) + " is not accepting connections");
  }
  const std::string hello = encode({config_.rank, dst, kHelloTag, hello_payload()});
  if (!detail::write_all(fd->get(), hello.data(), hello.size())) {
    mark_gone(dst);
    fail(ErrorCode::Transport, "handshake with rank " + std::to_string(dst) + " failed");
  }
  auto o = std::make_unique<Outgoing>();
  o->fd = std::move(*fd);
  const int raw = o->fd.get();
  auto& ref = *o;
  outgoing_.emplace(dst, std::move(o));
  {
    std::lock_guard state(mutex_);
    threads_.emplace_back([this, dst, raw] { watch_outgoing(dst, raw); });
  }
  return ref;
}

void RankContext::watch_outgoing(std::uint32_t dst, int fd) {
  // Peers never write on a connection we dialed, so any return means the
  // stream ended.
  char sink[256];
  while (true) {
    const ssize_t n = ::recv(fd, sink, sizeof sink, 0);
    if (n > 0) continue;
    if (n < 0 && errno == EINTR) continue;
    break;
  }
  std::lock_guard lock(mutex_);
  peers_[dst].monitor_closed = true;
  arrived_.notify_all();
}

void RankContext::mark_gone(std::uint32_t peer) {
  std::lock_guard lock(mutex_);
  peers_[peer].monitor_closed = true;
  if (peers_[peer].incoming == Link::Open) peers_[peer].incoming = Link::Closed;
  arrived_.notify_all();
}

void RankContext::accept_loop() {
  for (;;) {
    pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {wake_pipe_[0], POLLIN, 0}};
    const int ready = ::poll(fds, 2, -1);
    if (ready < 0) {
      if (errno == EINTR) continue;
      return;
    }
    if (fds[1].revents != 0) return;
    if ((fds[0].revents & POLLIN) == 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    std::lock_guard lock(mutex_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    incoming_fds_.push_back(fd);
    threads_.emplace_back([this, fd] { serve_incoming(fd); });
  }
}

void RankContext::serve_incoming(int fd) {
  std::uint32_t src = 0;
  bool registered = false;
  try {
    const auto hello = detail::read_envelope(fd);
    if (!hello || hello->tag != kHelloTag || hello->dst != config_.rank ||
        hello->src >= config_.size || hello->payload != hello_payload()) {
      // Not one of ours, or a peer with a different view of the job.
      ::shutdown(fd, SHUT_RDWR);
      return;
    }
    src = hello->src;
    {
      std::lock_guard lock(mutex_);
      if (peers_[src].incoming != Link::None) {
        ::shutdown(fd, SHUT_RDWR);
        return;
      }
      peers_[src].incoming = Link::Open;
      registered = true;
    }
    while (auto e = detail::read_envelope(fd)) {
      if (e->src != src || e->dst != config_.rank) break;
      std::lock_guard lock(mutex_);
      queues_[{src, e->tag}].push_back(std::move(e->payload));
      arrived_.notify_all();
    }
  } catch (const std::exception&) {
    // Malformed frame: treat the stream as ended.
  }
  if (!registered) return;
  std::lock_guard lock(mutex_);
  peers_[src].incoming = Link::Closed;
  arrived_.notify_all();
}

void RankContext::send_frame(std::uint32_t dst, std::uint32_t tag, std::string_view payload) {
  Outgoing& o = outgoing(dst);
  const std::string frame = encode({config_.rank, dst, tag, std::string(payload)});
  std::lock_guard lock(o.write_mutex);
  if (!detail::write_all(o.fd.get(), frame.data(), frame.size())) {
    mark_gone(dst);
    fail(ErrorCode::Transport, "connection to rank " + std::to_string(dst) + " lost");
  }
}

void RankContext::send(std::uint32_t dst, std::uint32_t tag, std::string_view payload) {
  check_peer(dst, "destination");
  if (tag >= kFirstReservedTag) {
    fail(ErrorCode::Usage, "tag " + std::to_string(tag) + " is reserved for the runtime");
  }
  send_frame(dst, tag, payload);
}

std::string RankContext::take(std::uint32_t src, std::uint32_t tag) {
  const auto key = std::make_pair(src, tag);
  {
    std::lock_guard lock(mutex_);
    if (auto it = queues_.find(key); it != queues_.end() && !it->second.empty()) {
      std::string payload = std::move(it->second.front());
      it->second.pop_front();
      return payload;
    }
  }
  // A connection of our own to the source lets us notice if it dies
  // without ever having connected to us.
  try {
    outgoing(src);
  } catch (const Error&) {
  }

  std::unique_lock lock(mutex_);
  arrived_.wait(lock, [&] {
    if (stopping_ || is_dead(peers_[src])) return true;
    auto it = queues_.find(key);
    return it != queues_.end() && !it->second.empty();
  });
  auto it = queues_.find(key);
  if (it != queues_.end() && !it->second.empty()) {
    std::string payload = std::move(it->second.front());
    it->second.pop_front();
    return payload;
  }
  fail(ErrorCode::Transport, "rank " + std::to_string(src) +
                                 " closed its connection before sending (tag " +
                                 std::to_string(tag) + ")");
}

std::string RankContext::recv(std::uint32_t src, std::uint32_t tag) {
  check_peer(src, "source");
  if (tag >= kFirstReservedTag) {
    fail(ErrorCode::Usage, "tag " + std::to_string(tag) + " is reserved for the runtime");
  }
  return take(src, tag);
}

void RankContext::finalize() {
  if (config_.size == 1) return;
  if (config_.rank != 0) {
    send_frame(0, kFinTag, {});
    take(0, kReleaseTag);
    // The acknowledgement tells rank 0 this rank no longer needs it.
    send_frame(0, kFinTag, {});
    return;
  }
  for (std::uint32_t r = 1; r < config_.size; ++r) take(r, kFinTag);
  for (std::uint32_t r = 1; r < config_.size; ++r) send_frame(r, kReleaseTag, {});
  for (std::uint32_t r = 1; r < config_.size; ++r) take(r, kFinTag);
}

}  // namespace hpcaas::rankmsg
