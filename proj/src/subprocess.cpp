#include "hpcaas/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "hpcaas/error.hpp"

extern char** environ;

namespace hpcaas {

namespace {

class SpawnActions {
 public:
  SpawnActions() { posix_spawn_file_actions_init(&actions_); }
  ~SpawnActions() { posix_spawn_file_actions_destroy(&actions_); }
  SpawnActions(const SpawnActions&) = delete;
  SpawnActions& operator=(const SpawnActions&) = delete;
  posix_spawn_file_actions_t* get() { return &actions_; }

 private:
  posix_spawn_file_actions_t actions_;
};

class SpawnAttributes {
 public:
  SpawnAttributes() { posix_spawnattr_init(&attr_); }
  ~SpawnAttributes() { posix_spawnattr_destroy(&attr_); }
  SpawnAttributes(const SpawnAttributes&) = delete;
  SpawnAttributes& operator=(const SpawnAttributes&) = delete;
  posix_spawnattr_t* get() { return &attr_; }

 private:
  posix_spawnattr_t attr_;
};

}  // namespace

ChildProcess spawn_process(const SpawnRequest& request) {
  if (request.argv.empty()) fail(ErrorCode::Usage, "spawn_process: empty argv");

  int pipe_fds[2];
  if (::pipe2(pipe_fds, O_CLOEXEC) != 0) {
    fail(ErrorCode::Io, std::string("pipe2: ") + std::strerror(errno));
  }

  SpawnActions actions;
  posix_spawn_file_actions_addopen(actions.get(), 0, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_adddup2(actions.get(), pipe_fds[1], 1);
  posix_spawn_file_actions_adddup2(actions.get(), pipe_fds[1], 2);

  // dup2 onto the same descriptor would keep FD_CLOEXEC set, so route such
  // descriptors through a temporary copy first.
  std::vector<int> temporaries;
  for (auto [parent_fd, child_fd] : request.inherit) {
    int source = parent_fd;
    if (source == child_fd) {
      source = ::fcntl(parent_fd, F_DUPFD_CLOEXEC, 64);
      temporaries.push_back(source);
    }
    posix_spawn_file_actions_adddup2(actions.get(), source, child_fd);
  }

  SpawnAttributes attr;
  short flags = POSIX_SPAWN_SETSIGMASK | POSIX_SPAWN_SETSIGDEF;
  sigset_t empty;
  sigemptyset(&empty);
  posix_spawnattr_setsigmask(attr.get(), &empty);
  sigset_t defaults;
  sigemptyset(&defaults);
  sigaddset(&defaults, SIGPIPE);
  sigaddset(&defaults, SIGINT);
  sigaddset(&defaults, SIGTERM);
  sigaddset(&defaults, SIGCHLD);
  posix_spawnattr_setsigdefault(attr.get(), &defaults);
  if (request.process_group >= 0) {
    flags |= POSIX_SPAWN_SETPGROUP;
    posix_spawnattr_setpgroup(attr.get(), request.process_group);
  }
  posix_spawnattr_setflags(attr.get(), flags);

  std::vector<char*> argv;
  argv.reserve(request.argv.size() + 1);
  for (const auto& arg : request.argv) argv.push_back(const_cast<char*>(arg.c_str()));
  argv.push_back(nullptr);

  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, argv[0], actions.get(), attr.get(), argv.data(), environ);
  ::close(pipe_fds[1]);
  for (int fd : temporaries) ::close(fd);
  if (rc != 0) {
    ::close(pipe_fds[0]);
    fail(ErrorCode::Io, "cannot start '" + request.argv[0] + "': " + std::strerror(rc));
  }
  return {pid, pipe_fds[0]};
}

int exit_code_from_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

void LineSplitter::feed(std::string_view bytes) {
  pending_.append(bytes);
  std::size_t start = 0;
  for (std::size_t nl; (nl = pending_.find('\n', start)) != std::string::npos; start = nl + 1) {
    sink_(std::string_view(pending_).substr(start, nl - start));
  }
  pending_.erase(0, start);
}

void LineSplitter::finish() {
  if (!pending_.empty()) sink_(pending_);
  pending_.clear();
}

CommandResult run_command(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          const LineSink& on_line) {
  const ChildProcess child = spawn_process({argv, {}, 0});
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  LineSplitter lines(on_line);
  CommandResult result;

  char buf[4096];
  for (;;) {
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd pfd{child.output_fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    const ssize_t n = ::read(child.output_fd, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    lines.feed(std::string_view(buf, static_cast<std::size_t>(n)));
  }
  lines.finish();
  ::close(child.output_fd);

  if (result.timed_out) ::kill(-child.pid, SIGKILL);
  int status = 0;
  while (::waitpid(child.pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_code = exit_code_from_status(status);
  return result;
}

}  // namespace hpcaas
