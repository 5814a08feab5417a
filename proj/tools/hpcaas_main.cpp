// hpcaas: gateway server, rank worker, benchmark and admin utilities.

#include <signal.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "hpcaas/http_api.hpp"
#include "hpcaas/rankmsg/launcher.hpp"
#include "hpcaas/workloads/registry.hpp"
#include "hpcaas/workloads/scaling.hpp"

namespace fs = std::filesystem;
using namespace hpcaas;

namespace {

std::vector<std::uint32_t> parse_n_list(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(item, &used);
      if (used != item.size() || v < 1 || v > 4096) throw std::invalid_argument(item);
      out.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--n-list", "'" + item + "' is not a process count");
    }
  }
  if (out.empty()) throw CLI::ValidationError("--n-list", "empty");
  return out;
}

struct ServeOptions {
  std::string bind = "0.0.0.0:8080";
  std::string data_dir;
  std::string backend = "local";
  std::string launcher = std::string(kDefaultRemoteTemplate);
  std::string remote_dir = std::string(kDefaultRemoteDir);
  double session_ttl_hours = 24;
  std::uint64_t max_upload = 16ull << 20;
  std::uint32_t max_processes = 64;
  double run_timeout_s = 3600;
  std::string ui_dir;
  bool insecure_host_keys = false;
  bool access_log = false;
};

int serve(const ServeOptions& o) {
  GatewayConfig config;
  config.data_dir = o.data_dir;
  config.default_backend = parse_backend(o.backend);
  config.launcher_template = o.launcher;
  config.remote_dir = o.remote_dir;
  config.session_ttl = std::chrono::seconds(static_cast<long long>(o.session_ttl_hours * 3600));
  config.max_upload_bytes = o.max_upload;
  config.max_processes = o.max_processes;
  config.run_timeout = std::chrono::milliseconds(static_cast<long long>(o.run_timeout_s * 1000));
  config.ui_dir = o.ui_dir;
  config.strict_host_key_checking = !o.insecure_host_keys;

  // Signals are taken synchronously by the main thread; every other thread
  // inherits the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Gateway gateway(config);
  ApiServer server(gateway, o.access_log);
  const BindAddress bind = parse_bind(o.bind);
  const int port = server.start(bind);
  std::cerr << "hpcaas listening on " << bind.host << ":" << port << ", data in "
            << fs::absolute(config.data_dir).string() << std::endl;
  if (gateway.auth().user_count() == 0) {
    std::cerr << "no users yet: run `hpcaas bootstrap-admin --data-dir " << o.data_dir
              << "` first" << std::endl;
  }

  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down (send the signal again to abort a running job)" << std::endl;
  std::thread([signals]() mutable {
    int again = 0;
    sigwait(&signals, &again);
    std::_Exit(130);
  }).detach();
  server.stop();
  return 0;
}

int bench_pi(const std::vector<std::uint32_t>& n_list, workloads::PiParams params,
             std::uint32_t repeats, const std::string& csv_path, bool plot) {
  workloads::ScalingOptions options;
  options.repeats = repeats;
  options.on_report = [](std::uint32_t n, const workloads::PiReport& r) {
    std::printf("n=%u total_hits=%llu total_tries=%llu estimate=%.10f time_ms=%.3f\n", n,
                static_cast<unsigned long long>(r.total_hits),
                static_cast<unsigned long long>(r.total_samples), r.estimate, r.elapsed_ms);
    std::fflush(stdout);
  };
  const auto rows = workloads::scaling_run(n_list, params, options);
  if (!csv_path.empty()) {
    workloads::emit_csv(rows, csv_path);
    std::printf("wrote %s\n", csv_path.c_str());
  }
  std::fputs(plot ? workloads::emit_plot_data(rows).c_str() : workloads::format_csv(rows).c_str(),
             stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HPC-as-a-service gateway"};
  app.require_subcommand(1);

  ServeOptions so;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP gateway");
  serve_cmd->add_option("--bind", so.bind, "listen address host:port")->envname("HPCAAS_BIND")
      ->capture_default_str();
  serve_cmd->add_option("--data-dir", so.data_dir, "state directory")->envname("HPCAAS_DATA_DIR")
      ->required();
  serve_cmd->add_option("--backend", so.backend, "default backend for jobs")
      ->envname("HPCAAS_BACKEND")->check(CLI::IsMember({"local", "remote"}))->capture_default_str();
  serve_cmd->add_option("--launcher", so.launcher,
                        "remote launch template; {n} {path} {hostfile} {hosts}")
      ->envname("HPCAAS_LAUNCHER")->capture_default_str();
  serve_cmd->add_option("--remote-dir", so.remote_dir, "job directory on every node")
      ->envname("HPCAAS_REMOTE_DIR")->capture_default_str();
  serve_cmd->add_option("--session-ttl-hours", so.session_ttl_hours)
      ->envname("HPCAAS_SESSION_TTL_HOURS")->capture_default_str();
  serve_cmd->add_option("--max-upload", so.max_upload, "bytes")->envname("HPCAAS_MAX_UPLOAD")
      ->capture_default_str();
  serve_cmd->add_option("--max-processes", so.max_processes)->envname("HPCAAS_MAX_PROCESSES")
      ->capture_default_str();
  serve_cmd->add_option("--run-timeout", so.run_timeout_s, "seconds")
      ->envname("HPCAAS_RUN_TIMEOUT")->capture_default_str();
  serve_cmd->add_option("--ui-dir", so.ui_dir, "static UI assets served at /")
      ->envname("HPCAAS_UI_DIR");
  serve_cmd->add_flag("--insecure-host-keys", so.insecure_host_keys,
                      "skip ssh host key checks (lab clusters)")
      ->envname("HPCAAS_INSECURE_HOST_KEYS");
  serve_cmd->add_flag("--access-log", so.access_log)->envname("HPCAAS_ACCESS_LOG");

  rankmsg::WorkerArgs wa;
  auto* worker_cmd = app.add_subcommand("worker", "one rank of a local job (spawned internally)");
  worker_cmd->add_option("--rank", wa.rank)->required();
  worker_cmd->add_option("--size", wa.size)->required();
  worker_cmd->add_option("--endpoints", wa.endpoints_file)->required();
  worker_cmd->add_option("--workload", wa.workload)->required();
  worker_cmd->add_option("--params", wa.params_json);
  worker_cmd->add_option("--job-token", wa.job_token);
  worker_cmd->add_option("--listen-fd", wa.listen_fd);

  auto* bench_cmd = app.add_subcommand("bench", "benchmarks");
  bench_cmd->require_subcommand(1);
  auto* pi_cmd = bench_cmd->add_subcommand("pi", "Monte Carlo pi timing over process counts");
  std::string n_list_text = "1,2,4,8";
  workloads::PiParams pi;
  std::uint32_t repeats = 3;
  std::string csv_path;
  bool plot = false;
  pi_cmd->add_option("--n-list", n_list_text, "comma-separated process counts")
      ->capture_default_str();
  pi_cmd->add_option("--max-tries", pi.max_tries)->check(CLI::PositiveNumber)
      ->capture_default_str();
  pi_cmd->add_option("--seed", pi.seed)->capture_default_str();
  pi_cmd->add_option("--repeats", repeats)->check(CLI::PositiveNumber)->capture_default_str();
  pi_cmd->add_option("--csv", csv_path, "also write the CSV here");
  pi_cmd->add_flag("--plot", plot, "print plot data instead of CSV");

  std::string admin_dir;
  std::string admin_user = "admin";
  std::string admin_password;
  auto* boot_cmd = app.add_subcommand("bootstrap-admin", "create the first administrator");
  boot_cmd->add_option("--data-dir", admin_dir)->envname("HPCAAS_DATA_DIR")->required();
  boot_cmd->add_option("--username", admin_user)->capture_default_str();
  boot_cmd->add_option("--password", admin_password)->envname("HPCAAS_ADMIN_PASSWORD")
      ->required();

  std::string routes_out;
  auto* routes_cmd = app.add_subcommand("routes", "print the HTTP route reference (markdown)");
  routes_cmd->add_option("--out", routes_out, "write to this file instead of stdout");

  app.add_subcommand("workloads", "list built-in workloads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*worker_cmd) return rankmsg::worker_entry(wa, std::cout, std::cerr);
    if (*serve_cmd) return serve(so);
    if (*pi_cmd) return bench_pi(parse_n_list(n_list_text), pi, repeats, csv_path, plot);
    if (*boot_cmd) {
      fs::create_directories(admin_dir);
      RecordStore store(fs::path(admin_dir) / "store");
      AuthService auth(store, AuthConfig{});
      const User u = auth.bootstrap_admin(admin_user, admin_password);
      std::cout << "created admin '" << u.username << "' (id " << u.id << ")\n";
      return 0;
    }
    if (*routes_cmd) {
      const std::string text = routes_markdown();
      if (routes_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(routes_out) << text;
      }
      return 0;
    }
    for (const auto& id : workloads::workload_ids()) {
      std::cout << id << "\t" << workloads::find_workload(id)->description << "\n";
    }
    return 0;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
