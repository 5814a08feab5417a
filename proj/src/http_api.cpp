#include "hpcaas/http_api.hpp"

#include <charconv>
#include <functional>
#include <iostream>
#include <map>

#include "hpcaas/ssh_transport.hpp"
#include "httplib.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace hpcaas {

namespace {

json user_json(const User& u) {
  return {{"id", u.id},
          {"username", u.username},
          {"role", to_string(u.role)},
          {"created_at", format_utc(u.created_at)}};
}

json node_json(const NodeRecord& n) {
  return {{"id", n.id},
          {"address", n.address},
          {"login_name", n.login_name},
          {"role", to_string(n.role)},
          {"added_at", format_utc(n.added_at)}};
}

json file_json(const ProgramFile& f) {
  return {{"pointer", f.pointer},
          {"owner_user_id", f.owner_user_id},
          {"file_no", f.file_no},
          {"original_name", f.original_name},
          {"stored_name", f.stored_name},
          {"byte_size", f.byte_size},
          {"content_sha256", f.content_sha256},
          {"uploaded_at", format_utc(f.uploaded_at)}};
}

json body_object(const httplib::Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception&) {
    fail(ErrorCode::Validation, "request body must be JSON");
  }
  if (!body.is_object()) fail(ErrorCode::Validation, "request body must be a JSON object");
  return body;
}

template <typename T>
T field(const json& body, const char* name) {
  if (!body.contains(name)) fail(ErrorCode::Validation, std::string("missing field '") + name + "'");
  try {
    return body.at(name).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::Validation, std::string("field '") + name + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& body, const char* name) {
  if (!body.contains(name) || body.at(name).is_null()) return std::nullopt;
  return field<T>(body, name);
}

// Non-numeric ids cannot name anything, so they are simply not found.
std::uint64_t path_id(const httplib::Request& req, const char* name) {
  const std::string& text = req.path_params.at(name);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::NotFound, "no resource '" + text + "'");
  }
  return value;
}

std::string bearer_token(const httplib::Request& req) {
  const std::string header = req.get_header_value("Authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (header.size() <= kPrefix.size() || header.compare(0, kPrefix.size(), kPrefix) != 0) {
    return {};
  }
  return header.substr(kPrefix.size());
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                const std::string& message) {
  send_json(res, {{"code", code}, {"message", message}}, status);
}

std::string param_path(const std::string& documented) {
  std::string out;
  for (char c : documented) {
    if (c == '{') {
      out += ':';
    } else if (c != '}') {
      out += c;
    }
  }
  return out;
}

struct RouteContext {
  std::string token;
};

using RouteHandler =
    std::function<void(const RouteContext&, const httplib::Request&, httplib::Response&)>;

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Unauthorized:
    case ErrorCode::InvalidCredentials: return 401;
    case ErrorCode::Forbidden: return 403;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Validation: return 422;
    case ErrorCode::Conflict:
    case ErrorCode::InvalidCluster: return 409;
    case ErrorCode::PayloadTooLarge: return 413;
    case ErrorCode::Usage: return 400;
    case ErrorCode::Transport: return 502;
    case ErrorCode::Timeout: return 504;
    case ErrorCode::Integrity:
    case ErrorCode::Io: return 500;
  }
  return 500;
}

const std::vector<RouteSpec>& route_table() {
  using C = Capability;
  static const std::vector<RouteSpec> routes = {
      {"GET", "/api/health", std::nullopt, "Liveness check", "", "{status: \"ok\"}"},
      {"POST", "/api/login", std::nullopt, "Exchange credentials for a bearer token",
       "{username, password}", "{token, role, user_id, expires_at}"},
      {"POST", "/api/users", C::ManageUsers, "Create an account", "{username, password, role}",
       "User"},
      {"GET", "/api/users", C::ManageUsers, "List accounts", "", "[User]"},
      {"GET", "/api/nodes", C::ManageNodes, "List cluster nodes", "", "[Node]"},
      {"POST", "/api/nodes", C::ManageNodes, "Register a node",
       "{address, login_name, role: master|slave}", "Node"},
      {"PUT", "/api/nodes/{id}", C::ManageNodes, "Modify a node",
       "{address?, login_name?, role?}", "Node"},
      {"DELETE", "/api/nodes/{id}", C::ManageNodes, "Remove a node", "", "{deleted: true}"},
      {"GET", "/api/nodes/{id}/health", C::ManageNodes, "Probe a node over the transport", "",
       "{reachable, rtt_ms, reason}"},
      {"GET", "/api/public-key", C::ManageNodes,
       "Gateway public key for the master's authorized_keys", "", "{algorithm, public_key}"},
      {"POST", "/api/files", C::UseFiles, "Upload a program", "multipart/form-data, field 'file'",
       "File"},
      {"GET", "/api/files", C::UseFiles, "List files (own; admins see all)", "", "[File]"},
      {"DELETE", "/api/files/{pointer}", C::UseFiles, "Delete a file (owner or admin)", "",
       "{deleted: true}"},
      {"POST", "/api/jobs", C::ExecuteJobs, "Queue a job for an owned file",
       "{pointer, num_processes, backend?: local|remote}", "Job"},
      {"GET", "/api/jobs", C::ExecuteJobs, "List own jobs", "", "[Job]"},
      {"GET", "/api/jobs/{id}", C::ExecuteJobs, "Job status (owner or admin)", "", "Job"},
      {"GET", "/api/jobs/{id}/output", C::ExecuteJobs, "Captured job output (owner or admin)", "",
       "text/plain"},
  };
  return routes;
}

std::string routes_markdown() {
  std::string out =
      "# HTTP API\n\n"
      "Generated by `hpcaas routes`. Every route except the public ones needs\n"
      "`Authorization: Bearer <token>` from `POST /api/login`. Bodies are JSON\n"
      "unless noted.\n\n"
      "| Method | Path | Capability | Request | Response | Summary |\n"
      "|---|---|---|---|---|---|\n";
  for (const auto& r : route_table()) {
    const std::string cap = r.capability ? std::string(to_string(*r.capability)) : "public";
    out += "| " + r.method + " | `" + r.path + "` | " + cap + " | " +
           (r.request.empty() ? "-" : r.request) + " | " + r.response + " | " + r.summary +
           " |\n";
  }
  out +=
      "\nAdmins hold every capability. Regular users hold UseFiles and ExecuteJobs.\n\n"
      "## Errors\n\n"
      "Failures return `{\"code\": <code>, \"message\": <text>}`.\n\n"
      "| Status | Codes |\n|---|---|\n";
  std::map<int, std::string> by_status;
  for (auto code : {ErrorCode::Unauthorized, ErrorCode::InvalidCredentials, ErrorCode::Forbidden,
                    ErrorCode::NotFound, ErrorCode::Validation, ErrorCode::Conflict,
                    ErrorCode::InvalidCluster, ErrorCode::PayloadTooLarge, ErrorCode::Usage,
                    ErrorCode::Transport, ErrorCode::Timeout, ErrorCode::Integrity,
                    ErrorCode::Io}) {
    auto& s = by_status[http_status(code)];
    if (!s.empty()) s += ", ";
    s += "`" + std::string(to_string(code)) + "`";
  }
  by_status[500] += ", `internal`";
  for (const auto& [status, codes] : by_status) {
    out += "| " + std::to_string(status) + " | " + codes + " |\n";
  }
  out +=
      "\n## Objects\n\n"
      "- User: `{id, username, role, created_at}`\n"
      "- Node: `{id, address, login_name, role, added_at}`\n"
      "- File: `{pointer, owner_user_id, file_no, original_name, stored_name, byte_size,\n"
      "  content_sha256, uploaded_at}`\n"
      "- Job: `{id, file_pointer, owner_user_id, num_processes, backend, status, submitted_at,\n"
      "  started_at, finished_at, exit_code, elapsed_ms, error, output_truncated}`\n"
      "\nTimestamps are UTC, `YYYY-MM-DDTHH:MM:SS.mmmZ`. Job status is one of\n"
      "queued, running, completed, failed.\n";
  return out;
}

BindAddress parse_bind(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::Validation, "bind: expected host:port");
  BindAddress out;
  out.host = text.substr(0, colon);
  if (out.host.size() >= 2 && out.host.front() == '[' && out.host.back() == ']') {
    out.host = out.host.substr(1, out.host.size() - 2);
  }
  if (out.host.empty()) out.host = "0.0.0.0";
  const std::string port = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), out.port);
  if (ec != std::errc() || ptr != port.data() + port.size() || out.port < 0 || out.port > 65535) {
    fail(ErrorCode::Validation, "bind: invalid port '" + port + "'");
  }
  return out;
}

void validate_config(const GatewayConfig& c) {
  if (c.data_dir.empty()) fail(ErrorCode::Validation, "data_dir: must be set");
  if (c.max_processes < 1) fail(ErrorCode::Validation, "max_processes: must be >= 1");
  if (c.max_upload_bytes < 1) fail(ErrorCode::Validation, "max_upload: must be >= 1");
  if (c.session_ttl.count() < 1) fail(ErrorCode::Validation, "session_ttl: must be positive");
  if (c.run_timeout.count() < 1) fail(ErrorCode::Validation, "run_timeout: must be positive");
  if (c.rsa_bits < 2048) fail(ErrorCode::Validation, "rsa_bits: must be >= 2048");
  try {
    substitute_template(c.launcher_template, 1, "p", "h", "h");
  } catch (const Error& e) {
    fail(ErrorCode::Validation, std::string("launcher: ") + e.what());
  }
  if (!c.ui_dir.empty() && !fs::is_directory(c.ui_dir)) {
    fail(ErrorCode::Validation, "ui_dir: '" + c.ui_dir.string() + "' is not a directory");
  }
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<NodeTransport> transport, Clock clock)
    : config_(std::move(config)) {
  validate_config(config_);
  std::error_code ec;
  const fs::path parent = fs::absolute(config_.data_dir).parent_path();
  if (!fs::is_directory(parent)) {
    fail(ErrorCode::Io, "data_dir: parent directory '" + parent.string() + "' does not exist");
  }
  fs::create_directory(config_.data_dir, ec);
  if (ec) fail(ErrorCode::Io, "data_dir: cannot create '" + config_.data_dir.string() + "'");

  store_ = std::make_unique<RecordStore>(config_.data_dir / "store");
  auth_ = std::make_unique<AuthService>(*store_, AuthConfig{config_.session_ttl, config_.password_cost},
                                        clock);
  keypair_ = std::make_unique<GatewayKeypair>(
      GatewayKeypair::load_or_generate(config_.data_dir / "keys", config_.rsa_bits));
  if (!transport) {
    SshOptions ssh;
    ssh.identity_file = keypair_->private_key_path();
    ssh.strict_host_key_checking = config_.strict_host_key_checking;
    transport = std::make_shared<SshTransport>(ssh);
  }
  cluster_ = std::make_unique<ClusterConfig>(*store_, *auth_, transport, clock);
  files_ = std::make_unique<FileModule>(*store_, *auth_, config_.data_dir / "files",
                                        FileModuleConfig{config_.max_upload_bytes}, clock);

  std::map<Backend, std::shared_ptr<JobRunner>> runners;
  runners[Backend::Local] = std::make_shared<LocalRunner>(config_.worker_exe);
  ClusterConfig* cluster = cluster_.get();
  runners[Backend::RemoteCluster] = std::make_shared<RemoteRunner>(
      transport, [cluster] { return cluster->snapshot(); }, config_.launcher_template,
      config_.remote_dir);
  JobServiceConfig jobs;
  jobs.max_processes = config_.max_processes;
  jobs.run_timeout = config_.run_timeout;
  jobs_ = std::make_unique<JobService>(*store_, *auth_, *files_, jobs, std::move(runners), clock);
}

Gateway::~Gateway() = default;

ApiServer::ApiServer(Gateway& gateway, bool access_log)
    : gateway_(gateway), server_(std::make_unique<httplib::Server>()) {
  // Multipart framing needs some room on top of the file itself; the file
  // module enforces the exact cap.
  // httplib's default also sets SO_REUSEPORT, which would let a second
  // gateway bind a port that is already serving.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  server_->set_payload_max_length(gateway_.config().max_upload_bytes + (1u << 20));
  server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 404) {
      send_error(res, 404, "not_found", "no such route");
    } else if (res.status == 413) {
      send_error(res, 413, "payload_too_large", "request body too large");
    } else {
      send_error(res, res.status, "usage", "bad request");
    }
    return httplib::Server::HandlerResponse::Handled;
  });
  if (access_log) {
    server_->set_logger([](const httplib::Request& req, const httplib::Response& res) {
      std::cerr << req.method << " " << req.path << " " << res.status << "\n";
    });
  }
  if (!gateway_.config().ui_dir.empty()) {
    server_->set_mount_point("/", gateway_.config().ui_dir.string());
  } else {
    server_->Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("hpcaas gateway: API under /api, no UI assets configured\n", "text/plain");
    });
  }
  register_routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::register_routes() {
  Gateway& gw = gateway_;
  std::map<std::string, RouteHandler> handlers;
  auto on = [&](const std::string& method, const std::string& path, RouteHandler h) {
    handlers[method + " " + path] = std::move(h);
  };

  on("GET", "/api/health", [](const RouteContext&, const httplib::Request&, httplib::Response& res) {
    send_json(res, {{"status", "ok"}});
  });
  on("POST", "/api/login", [&gw](const RouteContext&, const httplib::Request& req,
                                 httplib::Response& res) {
    const json body = body_object(req);
    const Session s =
        gw.auth().login(field<std::string>(body, "username"), field<std::string>(body, "password"));
    const auto user = gw.auth().find_user(s.user_id);
    send_json(res, {{"token", s.token},
                    {"role", user ? to_string(user->role) : "regular"},
                    {"user_id", s.user_id},
                    {"expires_at", format_utc(s.expires_at)}});
  });
  on("POST", "/api/users",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       const json body = body_object(req);
       const Role role = parse_role(optional_field<std::string>(body, "role").value_or("regular"));
       send_json(res, user_json(gw.auth().create_user(ctx.token, field<std::string>(body, "username"),
                                                      field<std::string>(body, "password"), role)));
     });
  on("GET", "/api/users", [&gw](const RouteContext&, const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& u : gw.auth().list_users()) out.push_back(user_json(u));
    send_json(res, out);
  });
  on("GET", "/api/nodes",
     [&gw](const RouteContext& ctx, const httplib::Request&, httplib::Response& res) {
       json out = json::array();
       for (const auto& n : gw.cluster().list_nodes(ctx.token)) out.push_back(node_json(n));
       send_json(res, out);
     });
  on("POST", "/api/nodes",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       const json body = body_object(req);
       const auto node = gw.cluster().add_node(
           ctx.token, field<std::string>(body, "address"), field<std::string>(body, "login_name"),
           parse_node_role(field<std::string>(body, "role")));
       send_json(res, node_json(node));
     });
  on("PUT", "/api/nodes/{id}",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       const json body = body_object(req);
       NodeUpdate update;
       update.address = optional_field<std::string>(body, "address");
       update.login_name = optional_field<std::string>(body, "login_name");
       if (auto role = optional_field<std::string>(body, "role")) update.role = parse_node_role(*role);
       send_json(res, node_json(gw.cluster().update_node(ctx.token, path_id(req, "id"), update)));
     });
  on("DELETE", "/api/nodes/{id}",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       send_json(res, {{"deleted", gw.cluster().delete_node(ctx.token, path_id(req, "id"))}});
     });
  on("GET", "/api/nodes/{id}/health",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       const HealthStatus h = gw.cluster().check_node(ctx.token, path_id(req, "id"));
       send_json(res, {{"reachable", h.reachable}, {"rtt_ms", h.rtt_ms}, {"reason", h.reason}});
     });
  on("GET", "/api/public-key",
     [&gw](const RouteContext&, const httplib::Request&, httplib::Response& res) {
       send_json(res, {{"algorithm", gw.keypair().algorithm()},
                       {"public_key", gw.keypair().public_key_line()}});
     });
  on("POST", "/api/files",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       if (!req.is_multipart_form_data() || !req.has_file("file")) {
         fail(ErrorCode::Validation, "upload needs multipart/form-data with a 'file' field");
       }
       const auto part = req.get_file_value("file");
       send_json(res, file_json(gw.files().upload_file(ctx.token, part.filename, part.content)));
     });
  on("GET", "/api/files",
     [&gw](const RouteContext& ctx, const httplib::Request&, httplib::Response& res) {
       json out = json::array();
       for (const auto& f : gw.files().list_files(ctx.token)) out.push_back(file_json(f));
       send_json(res, out);
     });
  on("DELETE", "/api/files/{pointer}",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       send_json(res, {{"deleted", gw.files().delete_file(ctx.token, path_id(req, "pointer"))}});
     });
  on("POST", "/api/jobs",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       const json body = body_object(req);
       const auto backend = optional_field<std::string>(body, "backend");
       const Job job = gw.jobs().submit_job(
           ctx.token, field<FilePointer>(body, "pointer"),
           field<std::uint32_t>(body, "num_processes"),
           backend ? parse_backend(*backend) : gw.config().default_backend);
       send_json(res, job_to_json(job, false));
     });
  on("GET", "/api/jobs",
     [&gw](const RouteContext& ctx, const httplib::Request&, httplib::Response& res) {
       json out = json::array();
       for (const auto& j : gw.jobs().list_jobs(ctx.token)) out.push_back(job_to_json(j, false));
       send_json(res, out);
     });
  on("GET", "/api/jobs/{id}",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       send_json(res, job_to_json(gw.jobs().job_status(ctx.token, path_id(req, "id")), false));
     });
  on("GET", "/api/jobs/{id}/output",
     [&gw](const RouteContext& ctx, const httplib::Request& req, httplib::Response& res) {
       res.set_content(gw.jobs().job_output(ctx.token, path_id(req, "id")),
                       "text/plain; charset=utf-8");
     });

  for (const RouteSpec& spec : route_table()) {
    const auto it = handlers.find(spec.method + " " + spec.path);
    if (it == handlers.end()) throw std::logic_error("no handler for " + spec.path);
    // Authorization runs first and uniformly, so a route's 401/403 decision
    // is exactly authorize() for its documented capability.
    httplib::Server::Handler wrapped = [&gw, spec, handler = it->second](
                                           const httplib::Request& req, httplib::Response& res) {
      try {
        RouteContext ctx{bearer_token(req)};
        if (spec.capability) gw.auth().authorize(ctx.token, *spec.capability);
        handler(ctx, req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what());
      } catch (const std::exception&) {
        send_error(res, 500, "internal", "internal error");
      }
    };
    const std::string pattern = param_path(spec.path);
    if (spec.method == "GET") {
      server_->Get(pattern, wrapped);
    } else if (spec.method == "POST") {
      server_->Post(pattern, wrapped);
    } else if (spec.method == "PUT") {
      server_->Put(pattern, wrapped);
    } else if (spec.method == "DELETE") {
      server_->Delete(pattern, wrapped);
    }
  }
}

int ApiServer::start(const BindAddress& bind) {
  int port = bind.port;
  if (port == 0) {
    port = server_->bind_to_any_port(bind.host);
    if (port < 0) fail(ErrorCode::Io, "cannot bind " + bind.host);
  } else if (!server_->bind_to_port(bind.host, port)) {
    fail(ErrorCode::Io, "cannot bind " + bind.host + ":" + std::to_string(port) +
                            " (address in use or not permitted)");
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void ApiServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void ApiServer::stop() {
  server_->stop();
  wait();
}

}  // namespace hpcaas
