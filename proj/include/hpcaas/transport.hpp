#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "hpcaas/subprocess.hpp"
#include "hpcaas/time.hpp"

namespace hpcaas {

using NodeId = std::uint64_t;

enum class NodeRole { Master, Slave };

std::string_view to_string(NodeRole role);
NodeRole parse_node_role(std::string_view text);

struct NodeRecord {
  NodeId id = 0;
  std::string address;
  std::string login_name;
  NodeRole role = NodeRole::Slave;
  TimePoint added_at;

  bool operator==(const NodeRecord&) const = default;
};

struct HealthStatus {
  bool reachable = false;
  double rtt_ms = 0.0;  // meaningful when reachable
  std::string reason;   // meaningful when unreachable

  static HealthStatus up(double rtt_ms) { return {true, rtt_ms, {}}; }
  static HealthStatus down(std::string reason) { return {false, 0.0, std::move(reason)}; }
};

/// How the gateway reaches cluster nodes: copy a file to a node, run a
/// command on the master with streamed output, and probe liveness.
///
/// copy() throws Error(Transport) on failure. run() returns the remote exit
/// code and throws Error(Timeout) when `timeout` elapses. Output lines reach
/// `on_line` in the order the remote command produced them.
class NodeTransport {
 public:
  virtual ~NodeTransport() = default;

  virtual void copy(const NodeRecord& node, const std::filesystem::path& local_path,
                    const std::string& remote_path) = 0;

  virtual int run(const NodeRecord& master, const std::string& command_line,
                  const LineSink& on_line, std::chrono::milliseconds timeout) = 0;

  virtual HealthStatus probe(const NodeRecord& node, std::chrono::milliseconds deadline) = 0;
};

}  // namespace hpcaas
