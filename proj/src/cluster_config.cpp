#include "hpcaas/cluster_config.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <future>
#include <mutex>
#include <thread>

#include "hpcaas/error.hpp"
#include "json.hpp"

using nlohmann::json;

namespace hpcaas {

namespace {

constexpr std::string_view kNodeKind = "node";

bool is_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool valid_hostname(const std::string& host) {
  if (host.empty() || host.size() > 253) return false;
  std::size_t start = 0;
  while (start <= host.size()) {
    std::size_t end = host.find('.', start);
    if (end == std::string::npos) end = host.size();
    const std::string_view label(host.data() + start, end - start);
    if (label.empty() || label.size() > 63) return false;
    if (label.front() == '-' || label.back() == '-') return false;
    if (!std::all_of(label.begin(), label.end(), [](char c) { return is_alnum(c) || c == '-'; })) {
      return false;
    }
    start = end + 1;
    if (end == host.size()) break;
  }
  // All-numeric dotted names must have parsed as IPv4 already.
  const bool numeric = std::all_of(host.begin(), host.end(),
                                   [](char c) { return (c >= '0' && c <= '9') || c == '.'; });
  return !numeric;
}

json node_to_json(const NodeRecord& n) {
  return {{"address", n.address},
          {"login_name", n.login_name},
          {"role", to_string(n.role)},
          {"added_at", format_utc(n.added_at)}};
}

}  // namespace

std::string_view to_string(NodeRole role) { return role == NodeRole::Master ? "master" : "slave"; }

NodeRole parse_node_role(std::string_view text) {
  if (text == "master") return NodeRole::Master;
  if (text == "slave") return NodeRole::Slave;
  fail(ErrorCode::Validation, "unknown node role '" + std::string(text) + "'");
}

bool is_valid_address(const std::string& address) {
  unsigned char buf[sizeof(in6_addr)];
  if (inet_pton(AF_INET, address.c_str(), buf) == 1) return true;
  if (inet_pton(AF_INET6, address.c_str(), buf) == 1) return true;
  return valid_hostname(address);
}

bool is_valid_login_name(const std::string& login_name) {
  if (login_name.empty() || login_name.size() > 32 || login_name.front() == '-') return false;
  return std::all_of(login_name.begin(), login_name.end(),
                     [](char c) { return is_alnum(c) || c == '_' || c == '-' || c == '.'; });
}

ClusterConfig::ClusterConfig(RecordStore& store, const AuthService& auth,
                             std::shared_ptr<NodeTransport> transport, Clock clock,
                             std::chrono::milliseconds probe_deadline)
    : store_(store),
      auth_(auth),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      probe_deadline_(probe_deadline) {
  for (auto& [id, bytes] : store_.list_records(kNodeKind)) {
    const json j = json::parse(bytes);
    nodes_.emplace(id, NodeRecord{id, j.at("address"), j.at("login_name"),
                                  parse_node_role(j.at("role").get<std::string>()),
                                  parse_utc(j.at("added_at"))});
  }
}

void ClusterConfig::validate(const NodeRecord& candidate, std::optional<NodeId> replacing) const {
  if (!is_valid_address(candidate.address)) {
    fail(ErrorCode::Validation, "invalid node address '" + candidate.address + "'");
  }
  if (!is_valid_login_name(candidate.login_name)) {
    fail(ErrorCode::Validation, "invalid login name '" + candidate.login_name + "'");
  }
  for (const auto& [id, node] : nodes_) {
    if (replacing && id == *replacing) continue;
    if (node.address == candidate.address && node.login_name == candidate.login_name) {
      fail(ErrorCode::Conflict, "node " + candidate.login_name + "@" + candidate.address +
                                    " is already registered");
    }
    if (candidate.role == NodeRole::Master && node.role == NodeRole::Master) {
      fail(ErrorCode::Conflict, "node " + std::to_string(id) + " is already the master");
    }
  }
}

NodeRecord ClusterConfig::add_node(const std::string& token, const std::string& address,
                                   const std::string& login_name, NodeRole role) {
  auth_.authorize(token, Capability::ManageNodes);
  std::unique_lock lock(mutex_);
  NodeRecord node{0, address, login_name, role, clock_()};
  validate(node, std::nullopt);
  node.id = store_.put_record(kNodeKind, node_to_json(node).dump());
  nodes_.emplace(node.id, node);
  return node;
}

NodeRecord ClusterConfig::update_node(const std::string& token, NodeId id,
                                      const NodeUpdate& update) {
  auth_.authorize(token, Capability::ManageNodes);
  std::unique_lock lock(mutex_);
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) fail(ErrorCode::NotFound, "no node " + std::to_string(id));

  NodeRecord next = it->second;
  if (update.address) next.address = *update.address;
  if (update.login_name) next.login_name = *update.login_name;
  if (update.role) next.role = *update.role;

  if (it->second.role == NodeRole::Master && next.role == NodeRole::Slave) {
    const bool has_slaves = std::any_of(nodes_.begin(), nodes_.end(), [&](const auto& kv) {
      return kv.first != id && kv.second.role == NodeRole::Slave;
    });
    if (has_slaves) {
      fail(ErrorCode::Conflict, "cannot demote the only master while slave nodes are registered");
    }
  }
  validate(next, id);
  store_.update_record(kNodeKind, id, node_to_json(next).dump());
  it->second = next;
  return next;
}

bool ClusterConfig::delete_node(const std::string& token, NodeId id) {
  auth_.authorize(token, Capability::ManageNodes);
  std::unique_lock lock(mutex_);
  if (nodes_.erase(id) == 0) fail(ErrorCode::NotFound, "no node " + std::to_string(id));
  return store_.delete_record(kNodeKind, id);
}

std::vector<NodeRecord> ClusterConfig::list_nodes(const std::string& token) const {
  auth_.authorize(token, Capability::ManageNodes);
  return snapshot();
}

std::vector<NodeRecord> ClusterConfig::snapshot() const {
  std::shared_lock lock(mutex_);
  std::vector<NodeRecord> out;
  out.reserve(nodes_.size());
  for (const auto& [id, node] : nodes_) out.push_back(node);
  return out;
}

HealthStatus ClusterConfig::check_node(const std::string& token, NodeId id) {
  auth_.authorize(token, Capability::ManageNodes);
  NodeRecord node;
  {
    std::shared_lock lock(mutex_);
    const auto it = nodes_.find(id);
    if (it == nodes_.end()) fail(ErrorCode::NotFound, "no node " + std::to_string(id));
    node = it->second;
  }
  if (!transport_) return HealthStatus::down("no transport configured");

  // The probe runs detached so a transport that ignores its deadline cannot
  // hold the caller past it.
  auto promise = std::make_shared<std::promise<HealthStatus>>();
  auto result = promise->get_future();
  std::thread([promise, transport = transport_, node, deadline = probe_deadline_] {
    try {
      promise->set_value(transport->probe(node, deadline));
    } catch (const std::exception& e) {
      promise->set_value(HealthStatus::down(e.what()));
    }
  }).detach();

  if (result.wait_for(probe_deadline_) != std::future_status::ready) {
    return HealthStatus::down("timeout");
  }
  return result.get();
}

}  // namespace hpcaas
