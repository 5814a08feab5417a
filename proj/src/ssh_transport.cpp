#include "hpcaas/ssh_transport.hpp"

#include "hpcaas/error.hpp"

namespace hpcaas {

namespace {

std::string user_at_host(const NodeRecord& node) {
  return node.login_name + "@" + node.address;
}

// scp wants IPv6 literals bracketed in host:path form.
std::string scp_host(const NodeRecord& node) {
  if (node.address.find(':') != std::string::npos) {
    return node.login_name + "@[" + node.address + "]";
  }
  return user_at_host(node);
}

// "~/x" is relative to the login directory for both scp and the shell.
std::string home_relative(const std::string& path) {
  if (path.rfind("~/", 0) == 0) return path.substr(2);
  return path;
}

std::string shell_path(const std::string& path) {
  if (path.rfind("~/", 0) == 0) return "\"$HOME\"/" + shell_quote(path.substr(2));
  return shell_quote(path);
}

std::string parent_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  if (slash == std::string::npos) return ".";
  if (slash == 0) return "/";
  return path.substr(0, slash);
}

}  // namespace

std::string shell_quote(const std::string& text) {
  std::string out = "'";
  for (char c : text) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

std::vector<std::string> SshTransport::common_options() const {
  std::vector<std::string> opts = {
      "-o", "BatchMode=yes",
      "-o", "ConnectTimeout=" + std::to_string(options_.connect_timeout.count()),
      "-o", std::string("StrictHostKeyChecking=") +
                (options_.strict_host_key_checking ? "yes" : "no"),
  };
  if (!options_.known_hosts_file.empty()) {
    opts.insert(opts.end(), {"-o", "UserKnownHostsFile=" + options_.known_hosts_file.string()});
  } else if (!options_.strict_host_key_checking) {
    opts.insert(opts.end(), {"-o", "UserKnownHostsFile=/dev/null"});
  }
  if (!options_.identity_file.empty()) {
    opts.insert(opts.end(), {"-o", "IdentitiesOnly=yes", "-i", options_.identity_file.string()});
  }
  return opts;
}

std::vector<std::string> SshTransport::ssh_argv(const NodeRecord& node,
                                                const std::string& command) const {
  std::vector<std::string> argv = {options_.ssh_program};
  const auto opts = common_options();
  argv.insert(argv.end(), opts.begin(), opts.end());
  argv.push_back("--");
  argv.push_back(user_at_host(node));
  argv.push_back(command);
  return argv;
}

std::vector<std::string> SshTransport::scp_argv(const NodeRecord& node,
                                                const std::filesystem::path& local,
                                                const std::string& remote) const {
  std::vector<std::string> argv = {options_.scp_program, "-q"};
  const auto opts = common_options();
  argv.insert(argv.end(), opts.begin(), opts.end());
  argv.push_back("--");
  argv.push_back(local.string());
  argv.push_back(scp_host(node) + ":" + home_relative(remote));
  return argv;
}

void SshTransport::copy(const NodeRecord& node, const std::filesystem::path& local_path,
                        const std::string& remote_path) {
  std::string diagnostics;
  auto collect = [&](std::string_view line) {
    if (!diagnostics.empty()) diagnostics += "; ";
    diagnostics += line;
  };
  const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(options_.copy_timeout);

  const auto mkdir = run_command(
      ssh_argv(node, "mkdir -p -- " + shell_path(parent_of(remote_path))), timeout, collect);
  if (mkdir.timed_out || mkdir.exit_code != 0) {
    fail(ErrorCode::Transport, "cannot prepare " + parent_of(remote_path) + " on " +
                                   user_at_host(node) + ": " + diagnostics);
  }
  const auto scp = run_command(scp_argv(node, local_path, remote_path), timeout, collect);
  if (scp.timed_out) {
    fail(ErrorCode::Transport, "copy to " + user_at_host(node) + " timed out");
  }
  if (scp.exit_code != 0) {
    fail(ErrorCode::Transport, "copy to " + user_at_host(node) + " failed (exit " +
                                   std::to_string(scp.exit_code) + "): " + diagnostics);
  }
}

int SshTransport::run(const NodeRecord& master, const std::string& command_line,
                      const LineSink& on_line, std::chrono::milliseconds timeout) {
  const auto result = run_command(ssh_argv(master, command_line), timeout, on_line);
  if (result.timed_out) fail(ErrorCode::Timeout, "timeout");
  return result.exit_code;
}

HealthStatus SshTransport::probe(const NodeRecord& node, std::chrono::milliseconds deadline) {
  const auto start = std::chrono::steady_clock::now();
  std::string last_line;
  const auto result =
      run_command(ssh_argv(node, "true"), deadline, [&](std::string_view l) { last_line = l; });
  const double rtt = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  if (result.timed_out) return HealthStatus::down("timeout");
  if (result.exit_code != 0) {
    if (last_line.find("Connection refused") != std::string::npos) {
      return HealthStatus::down("connection refused");
    }
    return HealthStatus::down(last_line.empty() ? "ssh exit " + std::to_string(result.exit_code)
                                                : last_line);
  }
  return HealthStatus::up(rtt);
}

}  // namespace hpcaas
