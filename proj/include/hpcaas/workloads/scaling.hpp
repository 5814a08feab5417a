#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hpcaas/workloads/pi.hpp"

namespace hpcaas::workloads {

struct TimingRow {
  std::uint32_t num_processes = 0;
  double time_ms = 0.0;
};

struct ScalingOptions {
  std::uint32_t repeats = 3;
  std::filesystem::path worker_exe;  // empty: the running executable
  // Called after every individual launch with its parsed report.
  std::function<void(std::uint32_t n, const PiReport& report)> on_report;
};

/// Runs the pi workload once per repeat for every n, strictly one job at a
/// time, and keeps the minimum "Time (ms)" each n reported. Rows follow the
/// order of `n_list`. A failed launch raises an error naming that n.
std::vector<TimingRow> scaling_run(const std::vector<std::uint32_t>& n_list,
                                   const PiParams& params, const ScalingOptions& options = {});

/// "no_of_processes,time_ms" header, then "n,t" rows with t to 3 decimals.
std::string format_csv(const std::vector<TimingRow>& rows);
void emit_csv(const std::vector<TimingRow>& rows, const std::filesystem::path& path);

/// Two whitespace-separated columns, one row per line, for plotting tools.
std::string emit_plot_data(const std::vector<TimingRow>& rows);

}  // namespace hpcaas::workloads
