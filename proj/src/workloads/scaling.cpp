#include "hpcaas/workloads/scaling.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "hpcaas/error.hpp"
#include "hpcaas/rankmsg/launcher.hpp"

namespace hpcaas::workloads {

namespace {

void require_rows(const std::vector<TimingRow>& rows) {
  if (rows.empty()) fail(ErrorCode::Validation, "no timing rows to emit");
}

std::string row_text(const TimingRow& row, char sep) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%u%c%.3f\n", row.num_processes, sep, row.time_ms);
  return buf;
}

}  // namespace

std::vector<TimingRow> scaling_run(const std::vector<std::uint32_t>& n_list,
                                   const PiParams& params, const ScalingOptions& options) {
  if (n_list.empty()) fail(ErrorCode::Validation, "n list is empty");
  if (options.repeats < 1) fail(ErrorCode::Validation, "repeats must be >= 1");
  for (auto n : n_list) {
    if (n < 1) fail(ErrorCode::Validation, "process counts must be >= 1");
  }

  std::vector<TimingRow> rows;
  for (const std::uint32_t n : n_list) {
    TimingRow row{n, 0.0};
    for (std::uint32_t i = 0; i < options.repeats; ++i) {
      rankmsg::LaunchRequest launch;
      launch.num_processes = n;
      launch.workload_id = "montecarlo_pi";
      launch.params_json = params.to_json().dump();
      launch.worker_exe = options.worker_exe;
      rankmsg::JobOutput result;
      try {
        result = rankmsg::launch_local(launch);
      } catch (const Error& e) {
        fail(e.code(), "scaling run with n=" + std::to_string(n) + " failed: " + e.what());
      }
      const auto report = parse_pi_report(result.output);
      if (result.exit_code != 0 || !report) {
        fail(ErrorCode::Transport, "scaling run with n=" + std::to_string(n) +
                                       " failed with exit code " +
                                       std::to_string(result.exit_code) + ":\n" + result.output);
      }
      if (options.on_report) options.on_report(n, *report);
      // Sub-microsecond runs still count as a positive duration.
      const double t = std::max(report->elapsed_ms, 0.001);
      row.time_ms = i == 0 ? t : std::min(row.time_ms, t);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_csv(const std::vector<TimingRow>& rows) {
  require_rows(rows);
  std::string out = "no_of_processes,time_ms\n";
  for (const auto& row : rows) out += row_text(row, ',');
  return out;
}

void emit_csv(const std::vector<TimingRow>& rows, const std::filesystem::path& path) {
  const std::string text = format_csv(rows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
}

std::string emit_plot_data(const std::vector<TimingRow>& rows) {
  require_rows(rows);
  std::string out;
  for (const auto& row : rows) out += row_text(row, ' ');
  return out;
}

}  // namespace hpcaas::workloads
