#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hpcaas/auth.hpp"
#include "hpcaas/cluster_config.hpp"
#include "hpcaas/error.hpp"
#include "hpcaas/execution.hpp"
#include "hpcaas/file_module.hpp"
#include "hpcaas/job_service.hpp"
#include "hpcaas/keypair.hpp"
#include "hpcaas/record_store.hpp"

namespace httplib {
class Server;
}

namespace hpcaas {

struct GatewayConfig {
  std::filesystem::path data_dir;
  Backend default_backend = Backend::Local;  // for job requests that name none
  std::string launcher_template = std::string(kDefaultRemoteTemplate);
  std::string remote_dir = std::string(kDefaultRemoteDir);
  std::chrono::seconds session_ttl = std::chrono::hours(24);
  std::uint64_t max_upload_bytes = 16ull << 20;
  std::uint32_t max_processes = 64;
  std::chrono::milliseconds run_timeout = std::chrono::hours(1);
  std::filesystem::path worker_exe;  // empty: the running executable
  std::filesystem::path ui_dir;      // static assets served at "/", optional
  PasswordCost password_cost = PasswordCost::interactive();
  int rsa_bits = 3072;
  bool strict_host_key_checking = true;
};

/// Throws Validation naming the offending field.
void validate_config(const GatewayConfig& config);

/// All gateway modules wired over one data directory:
/// `<data_dir>/store` records, `<data_dir>/files` uploads, `<data_dir>/keys`
/// the gateway keypair. The data dir is created if only its last component
/// is missing.
class Gateway {
 public:
  /// Without a transport the remote backend uses ssh/scp with the gateway key.
  explicit Gateway(GatewayConfig config, std::shared_ptr<NodeTransport> transport = nullptr,
                   Clock clock = system_clock());
  ~Gateway();

  const GatewayConfig& config() const noexcept { return config_; }
  RecordStore& store() { return *store_; }
  AuthService& auth() { return *auth_; }
  ClusterConfig& cluster() { return *cluster_; }
  FileModule& files() { return *files_; }
  JobService& jobs() { return *jobs_; }
  const GatewayKeypair& keypair() const { return *keypair_; }

 private:
  GatewayConfig config_;
  std::unique_ptr<RecordStore> store_;
  std::unique_ptr<AuthService> auth_;
  std::unique_ptr<GatewayKeypair> keypair_;
  std::unique_ptr<ClusterConfig> cluster_;
  std::unique_ptr<FileModule> files_;
  std::unique_ptr<JobService> jobs_;
};

struct RouteSpec {
  std::string method;
  std::string path;  // "{name}" marks a path parameter
  std::optional<Capability> capability;  // none: public route
  std::string summary;
  std::string request;   // body description, empty when none
  std::string response;  // success body description
};

/// Every API route. Drives server registration, docs and the auth tests.
const std::vector<RouteSpec>& route_table();

/// Markdown reference of the route table and the error model.
std::string routes_markdown();

int http_status(ErrorCode code);

struct BindAddress {
  std::string host;
  int port = 0;
};

/// "0.0.0.0:8080", "[::1]:8080" or ":8080".
BindAddress parse_bind(const std::string& text);

/// HTTP front of a Gateway. Bearer tokens in `Authorization`, JSON bodies,
/// errors as {"code", "message"}.
class ApiServer {
 public:
  explicit ApiServer(Gateway& gateway, bool access_log = false);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and starts serving on a background thread; port 0 picks a free
  /// port. Returns the bound port. Io error when the address is taken.
  int start(const BindAddress& bind);

  /// Blocks until stop() is called from elsewhere.
  void wait();

  /// Stops accepting, lets in-flight requests finish.
  void stop();

 private:
  void register_routes();

  Gateway& gateway_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace hpcaas
