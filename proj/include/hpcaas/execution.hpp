#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hpcaas/file_module.hpp"
#include "hpcaas/transport.hpp"
#include "json.hpp"

namespace hpcaas {

// Placeholders: {n} process count, {path} remote program path, {hostfile}
// the operator-maintained hostfile in the remote job dir, {hosts} the
// comma-separated node addresses, master first.
inline constexpr std::string_view kDefaultRemoteTemplate =
    "mpiexec -n {n} -hosts {hosts} python3 {path}";
inline constexpr std::string_view kDefaultRemoteDir = "~/jobs";

struct CopyToNode {
  NodeRecord node;
  std::filesystem::path local_path;
  std::string remote_path;
};

struct RunOnMaster {
  NodeRecord master;
  std::string command_line;
};

using PlanStep = std::variant<CopyToNode, RunOnMaster>;

/// Distribute-then-execute: the program is copied to the master and then to
/// every slave in id order, all at the same remote path, then one command
/// runs on the master.
struct CommandPlan {
  std::vector<PlanStep> steps;
};

/// Pure and deterministic. InvalidCluster unless `nodes` holds exactly one
/// Master; Validation for n = 0 or an unknown placeholder.
CommandPlan plan_commands(const ProgramFile& file, const std::filesystem::path& local_path,
                          const std::vector<NodeRecord>& nodes, std::uint32_t n,
                          std::string_view launcher_template,
                          std::string_view remote_dir = kDefaultRemoteDir);

/// Fills {n}, {path}, {hostfile} and {hosts}; "{{" and "}}" escape braces.
std::string substitute_template(std::string_view launcher_template, std::uint32_t n,
                                const std::string& path, const std::string& hostfile,
                                const std::string& hosts);

/// One-line human description, e.g. "copy 1000001.py to pi@10.0.0.3:~/jobs/1000001.py".
std::string describe(const PlanStep& step);

/// Replays the plan against a transport in order. A failing copy raises
/// Error(Transport) whose message names the step; the run step's exit code
/// is returned.
int execute_plan(const CommandPlan& plan, NodeTransport& transport, const LineSink& on_line,
                 std::chrono::milliseconds run_timeout);

/// Local backend job manifest: the uploaded file names a built-in workload,
/// e.g. {"workload": "montecarlo_pi", "params": {"max_tries": 1000000}}.
struct JobManifest {
  std::string workload;
  nlohmann::json params = nlohmann::json::object();

  /// Validation error unless the text names a registered workload with
  /// params it accepts.
  static JobManifest parse(std::string_view text);
};

}  // namespace hpcaas
