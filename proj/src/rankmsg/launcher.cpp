#include "hpcaas/rankmsg/launcher.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <random>

#include "hpcaas/error.hpp"
#include "hpcaas/record_store.hpp"
#include "hpcaas/workloads/registry.hpp"
#include "socket_io.hpp"

namespace fs = std::filesystem;

namespace hpcaas::rankmsg {

namespace {

std::string random_token() {
  std::random_device rd;
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 4; ++i) {
    std::uint32_t word = rd();
    for (int j = 0; j < 8; ++j, word >>= 4) out += kHex[word & 0xf];
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "hpcaas-job-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) {
      fail(ErrorCode::Io, "cannot create job directory: " + std::string(std::strerror(errno)));
    }
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct RankProcess {
  std::uint32_t rank = 0;
  pid_t pid = -1;
  detail::Fd output;
  std::optional<int> exit_code;
  std::unique_ptr<LineSplitter> lines;
};

void kill_and_reap(std::vector<RankProcess>& procs, pid_t group) {
  if (group > 0) ::kill(-group, SIGKILL);
  for (auto& p : procs) {
    if (p.pid > 0 && !p.exit_code) {
      ::kill(p.pid, SIGKILL);
      int status = 0;
      while (::waitpid(p.pid, &status, 0) < 0 && errno == EINTR) {
      }
      p.exit_code = exit_code_from_status(status);
    }
  }
}

}  // namespace

fs::path current_executable() {
  std::error_code ec;
  auto path = fs::read_symlink("/proc/self/exe", ec);
  if (ec) fail(ErrorCode::Io, "cannot resolve the running executable: " + ec.message());
  return path;
}

JobOutput launch_local(const LaunchRequest& request) {
  if (request.num_processes < 1) fail(ErrorCode::Validation, "number of processes must be >= 1");
  nlohmann::json params;
  try {
    params = nlohmann::json::parse(request.params_json);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::Validation, "workload params are not valid JSON");
  }
  workloads::require_workload(request.workload_id, params);
  const fs::path exe = request.worker_exe.empty() ? current_executable() : request.worker_exe;

  JobOutput result;
  result.job_token = random_token();
  const auto start = std::chrono::steady_clock::now();
  const std::uint32_t n = request.num_processes;

  // Listeners are bound here and inherited, so every rank's address is known
  // and accepting before any rank starts.
  std::vector<detail::Fd> listeners;
  std::vector<Endpoint> endpoints;
  for (std::uint32_t r = 0; r < n; ++r) {
    listeners.push_back(detail::listen_on({"127.0.0.1", 0}, static_cast<int>(n) + 8));
    endpoints.push_back({"127.0.0.1", detail::local_port(listeners.back().get())});
  }
  TempDir dir;
  const fs::path table = dir.path() / "endpoints";
  write_file_atomically(table, format_endpoint_table(endpoints));

  auto emit = [&](std::uint32_t rank, std::string_view line) {
    std::string text = rank == 0 ? std::string(line)
                                 : "[rank " + std::to_string(rank) + "] " + std::string(line);
    result.output += text;
    result.output += '\n';
    if (request.on_line) request.on_line(text);
  };

  std::vector<RankProcess> procs;
  procs.reserve(n);
  pid_t group = 0;
  try {
    for (std::uint32_t r = 0; r < n; ++r) {
      SpawnRequest spawn;
      spawn.argv = {exe.string(), "worker",
                    "--rank", std::to_string(r),
                    "--size", std::to_string(n),
                    "--endpoints", table.string(),
                    "--workload", request.workload_id,
                    "--params", request.params_json,
                    "--job-token", result.job_token,
                    "--listen-fd", "3"};
      spawn.inherit = {{listeners[r].get(), 3}};
      spawn.process_group = group;
      const ChildProcess child = spawn_process(spawn);
      if (group == 0) group = child.pid;
      RankProcess p;
      p.rank = r;
      p.pid = child.pid;
      p.output = detail::Fd(child.output_fd);
      p.lines = std::make_unique<LineSplitter>([&emit, r](std::string_view l) { emit(r, l); });
      procs.push_back(std::move(p));
    }
  } catch (...) {
    kill_and_reap(procs, group);
    throw;
  }
  listeners.clear();

  const auto deadline = start + request.timeout;
  std::optional<std::chrono::steady_clock::time_point> kill_at;
  std::optional<int> first_failure;
  bool killed = false;
  char buf[8192];
  for (;;) {
    std::vector<pollfd> fds;
    std::vector<RankProcess*> owners;
    for (auto& p : procs) {
      if (p.output) {
        fds.push_back({p.output.get(), POLLIN, 0});
        owners.push_back(&p);
      }
    }
    const bool all_reaped =
        std::all_of(procs.begin(), procs.end(), [](const RankProcess& p) { return p.exit_code; });
    if (fds.empty() && all_reaped) break;

    if (!fds.empty()) {
      const int ready = ::poll(fds.data(), fds.size(), 20);
      if (ready < 0 && errno != EINTR) fail(ErrorCode::Io, "poll failed");
      for (std::size_t i = 0; ready > 0 && i < fds.size(); ++i) {
        if (fds[i].revents == 0) continue;
        const ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
        if (got > 0) {
          owners[i]->lines->feed(std::string_view(buf, static_cast<std::size_t>(got)));
        } else if (got == 0 || errno != EINTR) {
          owners[i]->lines->finish();
          owners[i]->output.reset();
        }
      }
    } else {
      ::usleep(20'000);
    }

    // Peers of a failed rank usually fail right after it with the runtime
    // failure code, sometimes before it is reaped. A workload's own code
    // arriving later still wins over such a knock-on failure.
    for (auto& p : procs) {
      if (p.exit_code) continue;
      int status = 0;
      const pid_t r = ::waitpid(p.pid, &status, WNOHANG);
      if (r != p.pid) continue;
      p.exit_code = exit_code_from_status(status);
      if (*p.exit_code == 0) continue;
      if (!first_failure) {
        first_failure = *p.exit_code;
        kill_at = std::chrono::steady_clock::now() + request.grace;
      } else if (!killed && *first_failure == kRuntimeFailureExit &&
                 *p.exit_code != kRuntimeFailureExit) {
        first_failure = *p.exit_code;
      }
    }

    const auto now = std::chrono::steady_clock::now();
    if (!killed && now >= deadline) {
      result.timed_out = true;
      killed = true;
      ::kill(-group, SIGKILL);
    } else if (!killed && kill_at && now >= *kill_at) {
      killed = true;
      ::kill(-group, SIGKILL);
    }
  }

  if (result.timed_out) {
    result.exit_code = 124;
  } else {
    result.exit_code = first_failure.value_or(0);
  }
  result.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace hpcaas::rankmsg
