#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hpcaas/rankmsg/context.hpp"
#include "json.hpp"

namespace hpcaas::workloads {

/// A workload body runs once in every rank process with the same params.
/// Its return value becomes that rank's exit code.
using WorkloadBody = std::function<int(rankmsg::RankContext&, const nlohmann::json& params)>;

struct Workload {
  std::string id;
  std::string description;
  // Throws Error(Validation) for params the body cannot run with.
  std::function<void(const nlohmann::json& params)> validate;
  WorkloadBody body;
};

/// Built-in workloads; the local backend runs nothing else.
const Workload* find_workload(std::string_view id);
std::vector<std::string> workload_ids();

/// Throws Validation for an unknown id or params the workload rejects.
const Workload& require_workload(std::string_view id, const nlohmann::json& params);

}  // namespace hpcaas::workloads
