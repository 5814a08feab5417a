#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "hpcaas/transport.hpp"

namespace hpcaas {

struct SshOptions {
  std::filesystem::path identity_file;
  bool strict_host_key_checking = true;
  std::filesystem::path known_hosts_file;  // empty: the user's default
  std::chrono::seconds connect_timeout{5};
  std::chrono::minutes copy_timeout{5};
  std::string ssh_program = "ssh";
  std::string scp_program = "scp";
};

/// NodeTransport over the system OpenSSH client. Authenticates with the
/// gateway keypair; never prompts (BatchMode).
class SshTransport final : public NodeTransport {
 public:
  explicit SshTransport(SshOptions options) : options_(std::move(options)) {}

  void copy(const NodeRecord& node, const std::filesystem::path& local_path,
            const std::string& remote_path) override;

  int run(const NodeRecord& master, const std::string& command_line, const LineSink& on_line,
          std::chrono::milliseconds timeout) override;

  HealthStatus probe(const NodeRecord& node, std::chrono::milliseconds deadline) override;

  // Exposed for tests.
  std::vector<std::string> ssh_argv(const NodeRecord& node, const std::string& command) const;
  std::vector<std::string> scp_argv(const NodeRecord& node, const std::filesystem::path& local,
                                    const std::string& remote) const;

 private:
  std::vector<std::string> common_options() const;

  SshOptions options_;
};

/// Single-quotes `text` for a POSIX shell.
std::string shell_quote(const std::string& text);

}  // namespace hpcaas
