#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hpcaas/error.hpp"
#include "hpcaas/transport.hpp"

namespace hpcaas::testing {

// In-process NodeTransport fake. Records every call in order and answers
// from a script: which copies fail, what the run prints and returns, how
// probes behave per node address.
class ScriptedTransport final : public NodeTransport {
 public:
  struct Call {
    std::string kind;  // "copy" | "run" | "probe"
    std::string address;
    std::string detail;  // remote path or command line

    bool operator==(const Call&) const = default;
  };

  enum class ProbeMode { Accept, Refuse, Hang };

  std::vector<std::string> run_output = {"hello from master"};
  int run_exit = 0;
  bool run_times_out = false;
  std::map<std::string, std::string> copy_failures;  // address -> message
  std::map<std::string, ProbeMode> probes;           // default Accept
  std::chrono::milliseconds hang_for{800};

  void copy(const NodeRecord& node, const std::filesystem::path&,
            const std::string& remote_path) override {
    record({"copy", node.address, remote_path});
    if (auto it = copy_failures.find(node.address); it != copy_failures.end()) {
      fail(ErrorCode::Transport, it->second);
    }
  }

  int run(const NodeRecord& master, const std::string& command_line, const LineSink& on_line,
          std::chrono::milliseconds) override {
    record({"run", master.address, command_line});
    for (const auto& line : run_output) on_line(line);
    if (run_times_out) fail(ErrorCode::Timeout, "timeout");
    return run_exit;
  }

  HealthStatus probe(const NodeRecord& node, std::chrono::milliseconds) override {
    record({"probe", node.address, ""});
    const auto it = probes.find(node.address);
    const ProbeMode mode = it == probes.end() ? ProbeMode::Accept : it->second;
    if (mode == ProbeMode::Refuse) return HealthStatus::down("connection refused");
    if (mode == ProbeMode::Hang) std::this_thread::sleep_for(hang_for);
    return HealthStatus::up(0.5);
  }

  std::vector<Call> calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

 private:
  void record(Call c) {
    std::lock_guard lock(mutex_);
    calls_.push_back(std::move(c));
  }

  mutable std::mutex mutex_;
  std::vector<Call> calls_;
};

}  // namespace hpcaas::testing
