#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "hpcaas/auth.hpp"
#include "hpcaas/record_store.hpp"
#include "hpcaas/transport.hpp"

namespace hpcaas {

/// Accepts IPv4/IPv6 literals and RFC 1123 hostnames.
bool is_valid_address(const std::string& address);

/// Login names are passed to ssh, so they are restricted to a portable
/// POSIX user-name alphabet and may not start with '-'.
bool is_valid_login_name(const std::string& login_name);

struct NodeUpdate {
  std::optional<std::string> address;
  std::optional<std::string> login_name;
  std::optional<NodeRole> role;
};

/// Admin-only registry of cluster nodes (record kind "node").
///
/// Invariants held after every mutation: at most one Master; (address,
/// login_name) unique; every address syntactically valid.
class ClusterConfig {
 public:
  ClusterConfig(RecordStore& store, const AuthService& auth,
                std::shared_ptr<NodeTransport> transport, Clock clock = system_clock(),
                std::chrono::milliseconds probe_deadline = std::chrono::seconds(5));

  NodeRecord add_node(const std::string& token, const std::string& address,
                      const std::string& login_name, NodeRole role);
  NodeRecord update_node(const std::string& token, NodeId id, const NodeUpdate& update);
  bool delete_node(const std::string& token, NodeId id);
  std::vector<NodeRecord> list_nodes(const std::string& token) const;

  /// Transport-level probe bounded by the probe deadline. Never mutates the
  /// registry; a probe that overruns yields Unreachable("timeout").
  HealthStatus check_node(const std::string& token, NodeId id);

  /// Registry contents for internal consumers (execution planning).
  std::vector<NodeRecord> snapshot() const;

 private:
  void validate(const NodeRecord& candidate, std::optional<NodeId> replacing) const;
  void persist(const NodeRecord& node, bool is_new);

  RecordStore& store_;
  const AuthService& auth_;
  std::shared_ptr<NodeTransport> transport_;
  Clock clock_;
  std::chrono::milliseconds probe_deadline_;

  mutable std::shared_mutex mutex_;
  std::map<NodeId, NodeRecord> nodes_;
};

}  // namespace hpcaas
