#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "hpcaas/subprocess.hpp"

namespace hpcaas::rankmsg {

/// Arguments of `hpcaas worker`, one rank of a locally launched job.
struct WorkerArgs {
  std::uint32_t rank = 0;
  std::uint32_t size = 0;
  std::filesystem::path endpoints_file;
  std::string workload;
  std::string params_json = "{}";
  std::string job_token;
  int listen_fd = -1;  // listener inherited from the launcher
};

inline constexpr int kRuntimeFailureExit = 1;

/// Runs one rank to completion and returns the process exit code: the
/// workload's own code, 1 on a runtime failure, 2 on bad arguments.
int worker_entry(const WorkerArgs& args, std::ostream& out, std::ostream& err);

struct LaunchRequest {
  std::uint32_t num_processes = 1;
  std::string workload_id;
  std::string params_json = "{}";
  std::filesystem::path worker_exe;  // binary providing the `worker` subcommand
  std::chrono::milliseconds timeout = std::chrono::hours(1);
  std::chrono::milliseconds grace = std::chrono::seconds(2);
  LineSink on_line;  // optional live view of the job output
};

struct JobOutput {
  std::string output;
  int exit_code = -1;
  double elapsed_ms = 0.0;
  bool timed_out = false;
  std::string job_token;
};

/// Starts `num_processes` worker processes on loopback, one per rank, and
/// waits for all of them. Rank 0's output forms the job output; other ranks'
/// lines are kept with a "[rank r] " prefix. When a rank fails the rest get
/// the grace period, then the whole job is killed. No worker outlives the call.
/// The exit code is the first nonzero rank code, except that a workload's own
/// code replaces a runtime failure it triggered in a peer.
JobOutput launch_local(const LaunchRequest& request);

/// Absolute path of the running executable.
std::filesystem::path current_executable();

}  // namespace hpcaas::rankmsg
