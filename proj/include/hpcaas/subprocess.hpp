#pragma once

#include <sys/types.h>

#include <chrono>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hpcaas {

struct SpawnRequest {
  std::vector<std::string> argv;
  // (parent fd, child fd) pairs made available in the child.
  std::vector<std::pair<int, int>> inherit;
  // -1: stay in the caller's group, 0: lead a new group, >0: join that group.
  pid_t process_group = -1;
};

struct ChildProcess {
  pid_t pid = -1;
  int output_fd = -1;  // read end of the child's merged stdout+stderr
};

/// Starts argv[0] (PATH lookup when it has no slash). Throws Io on failure.
ChildProcess spawn_process(const SpawnRequest& request);

/// Exit code for a waitpid status; signals map to 128 + signo, shell style.
int exit_code_from_status(int status);

struct CommandResult {
  int exit_code = -1;
  bool timed_out = false;
};

using LineSink = std::function<void(std::string_view line)>;

/// Runs a command to completion, delivering merged output one line at a time
/// (newline stripped). On timeout the whole process group is killed.
CommandResult run_command(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          const LineSink& on_line);

/// Splits a byte stream into lines, holding back any incomplete tail.
class LineSplitter {
 public:
  explicit LineSplitter(LineSink sink) : sink_(std::move(sink)) {}
  void feed(std::string_view bytes);
  void finish();

 private:
  LineSink sink_;
  std::string pending_;
};

}  // namespace hpcaas
