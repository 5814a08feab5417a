#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "hpcaas/rankmsg/endpoints.hpp"

namespace hpcaas::rankmsg {

struct RankConfig {
  std::uint32_t rank = 0;
  std::uint32_t size = 1;
  std::vector<Endpoint> endpoints;  // indexed by rank
  std::string job_token;
  // Listening socket handed over by the launcher; -1 binds endpoints[rank].
  int listen_fd = -1;
  // With launcher-bound listeners a refused connection means the peer is
  // gone; otherwise it may just not have started yet and dialing retries.
  bool peers_prebound = false;
  std::chrono::milliseconds connect_deadline = std::chrono::seconds(10);
  std::ostream* out = nullptr;  // defaults to std::cout
};

/// One process's view of a job: its rank, the job size and blocking
/// point-to-point messaging with every other rank.
///
/// Construction performs the rendezvous: every rank > 0 dials rank 0 and
/// presents the job token and its copy of the endpoint table. Connections
/// to other peers are dialed on first use. Each rank sends only on
/// connections it dialed, so one TCP stream carries all traffic for a
/// (src, dst) pair and per-pair FIFO order follows.
///
/// recv() never hangs on a dead peer: once a peer's connection drops, a recv
/// from it with nothing queued throws Error(Transport).
class RankContext {
 public:
  explicit RankContext(RankConfig config);
  ~RankContext();

  RankContext(const RankContext&) = delete;
  RankContext& operator=(const RankContext&) = delete;

  std::uint32_t rank() const noexcept { return config_.rank; }
  std::uint32_t size() const noexcept { return config_.size; }
  const std::string& job_token() const noexcept { return config_.job_token; }
  std::ostream& out() const noexcept { return *config_.out; }

  void send(std::uint32_t dst, std::uint32_t tag, std::string_view payload);
  void send(std::uint32_t dst, std::string_view payload) { send(dst, 0, payload); }

  std::string recv(std::uint32_t src, std::uint32_t tag = 0);

  /// Collective shutdown: returns once every rank has called finalize(), so
  /// no rank tears down its sockets while a peer may still need them.
  void finalize();

 private:
  struct Outgoing;
  enum class Link : std::uint8_t { None, Open, Closed };
  struct PeerState {
    Link incoming = Link::None;
    bool monitor_closed = false;
  };

  void check_peer(std::uint32_t peer, const char* what) const;
  Outgoing& outgoing(std::uint32_t dst);
  void send_frame(std::uint32_t dst, std::uint32_t tag, std::string_view payload);
  std::string take(std::uint32_t src, std::uint32_t tag);
  void accept_loop();
  void serve_incoming(int fd);
  void watch_outgoing(std::uint32_t dst, int fd);
  void mark_gone(std::uint32_t peer);
  std::string hello_payload() const;
  void shutdown_all();
  static bool is_dead(const PeerState& peer);

  RankConfig config_;
  int listen_fd_ = -1;
  int wake_pipe_[2] = {-1, -1};

  std::mutex mutex_;
  std::condition_variable arrived_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::deque<std::string>> queues_;
  std::vector<PeerState> peers_;
  std::vector<int> incoming_fds_;
  bool stopping_ = false;

  std::mutex outgoing_mutex_;
  std::map<std::uint32_t, std::unique_ptr<Outgoing>> outgoing_;

  std::vector<std::thread> threads_;
  std::thread acceptor_;
};

}  // namespace hpcaas::rankmsg
