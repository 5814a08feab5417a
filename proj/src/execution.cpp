#include "hpcaas/execution.hpp"

#include <algorithm>

#include "hpcaas/error.hpp"
#include "hpcaas/workloads/registry.hpp"

using nlohmann::json;

namespace hpcaas {

namespace {

std::string join_path(std::string_view dir, const std::string& name) {
  std::string out(dir);
  while (out.size() > 1 && out.back() == '/') out.pop_back();
  if (out.empty()) return name;
  if (out.back() != '/') out += '/';
  return out + name;
}

}  // namespace

std::string substitute_template(std::string_view tmpl, std::uint32_t n, const std::string& path,
                                const std::string& hostfile, const std::string& hosts) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if ((c == '{' || c == '}') && i + 1 < tmpl.size() && tmpl[i + 1] == c) {
      out += c;
      ++i;
      continue;
    }
    if (c == '}') fail(ErrorCode::Validation, "launcher template has an unmatched '}'");
    if (c != '{') {
      out += c;
      continue;
    }
    const auto close = tmpl.find('}', i);
    if (close == std::string_view::npos) {
      fail(ErrorCode::Validation, "launcher template has an unterminated placeholder");
    }
    const std::string_view name = tmpl.substr(i + 1, close - i - 1);
    if (name == "n") {
      out += std::to_string(n);
    } else if (name == "path") {
      out += path;
    } else if (name == "hostfile") {
      out += hostfile;
    } else if (name == "hosts") {
      out += hosts;
    } else {
      fail(ErrorCode::Validation, "unknown launcher placeholder {" + std::string(name) + "}");
    }
    i = close;
  }
  return out;
}

CommandPlan plan_commands(const ProgramFile& file, const std::filesystem::path& local_path,
                          const std::vector<NodeRecord>& nodes, std::uint32_t n,
                          std::string_view launcher_template, std::string_view remote_dir) {
  if (n == 0) fail(ErrorCode::Validation, "number of processes must be >= 1");
  std::vector<NodeRecord> masters;
  std::vector<NodeRecord> slaves;
  for (const auto& node : nodes) {
    (node.role == NodeRole::Master ? masters : slaves).push_back(node);
  }
  if (masters.size() != 1) {
    fail(ErrorCode::InvalidCluster, "cluster needs exactly one master node, found " +
                                        std::to_string(masters.size()));
  }
  std::sort(slaves.begin(), slaves.end(),
            [](const NodeRecord& a, const NodeRecord& b) { return a.id < b.id; });

  const std::string remote_path = join_path(remote_dir, file.stored_name);
  std::string hosts = masters.front().address;
  for (const auto& s : slaves) hosts += "," + s.address;

  CommandPlan plan;
  plan.steps.emplace_back(CopyToNode{masters.front(), local_path, remote_path});
  for (const auto& s : slaves) plan.steps.emplace_back(CopyToNode{s, local_path, remote_path});
  plan.steps.emplace_back(RunOnMaster{
      masters.front(), substitute_template(launcher_template, n, remote_path,
                                           join_path(remote_dir, "hostfile"), hosts)});
  return plan;
}

std::string describe(const PlanStep& step) {
  if (const auto* copy = std::get_if<CopyToNode>(&step)) {
    return "copy " + copy->local_path.filename().string() + " to " + copy->node.login_name + "@" +
           copy->node.address + ":" + copy->remote_path;
  }
  const auto& run = std::get<RunOnMaster>(step);
  return "run on " + run.master.login_name + "@" + run.master.address + ": " + run.command_line;
}

int execute_plan(const CommandPlan& plan, NodeTransport& transport, const LineSink& on_line,
                 std::chrono::milliseconds run_timeout) {
  int exit_code = -1;
  bool ran = false;
  const std::size_t total = plan.steps.size();
  for (std::size_t i = 0; i < total; ++i) {
    const auto& step = plan.steps[i];
    const std::string label =
        "step " + std::to_string(i + 1) + "/" + std::to_string(total) + " (" + describe(step) + ")";
    if (const auto* copy = std::get_if<CopyToNode>(&step)) {
      try {
        transport.copy(copy->node, copy->local_path, copy->remote_path);
      } catch (const std::exception& e) {
        fail(ErrorCode::Transport, label + " failed: " + e.what());
      }
      continue;
    }
    const auto& run = std::get<RunOnMaster>(step);
    exit_code = transport.run(run.master, run.command_line, on_line, run_timeout);
    ran = true;
  }
  if (!ran) fail(ErrorCode::Usage, "command plan has no run step");
  return exit_code;
}

JobManifest JobManifest::parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception&) {
    fail(ErrorCode::Validation, "local jobs need a JSON manifest naming a built-in workload");
  }
  if (!doc.is_object() || !doc.contains("workload") || !doc["workload"].is_string()) {
    fail(ErrorCode::Validation, "manifest must be an object with a string \"workload\"");
  }
  JobManifest m;
  m.workload = doc["workload"].get<std::string>();
  if (doc.contains("params")) m.params = doc["params"];
  workloads::require_workload(m.workload, m.params);
  return m;
}

}  // namespace hpcaas
