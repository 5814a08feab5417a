#include <ostream>

#include "hpcaas/error.hpp"
#include "hpcaas/rankmsg/context.hpp"
#include "hpcaas/rankmsg/launcher.hpp"
#include "hpcaas/workloads/registry.hpp"

using nlohmann::json;

namespace hpcaas::rankmsg {

int worker_entry(const WorkerArgs& args, std::ostream& out, std::ostream& err) {
  const std::string who = "rank " + std::to_string(args.rank) + ": ";
  const workloads::Workload* workload = nullptr;
  json params;
  RankConfig config;
  try {
    config.endpoints = read_endpoint_file(args.endpoints_file);
    if (config.endpoints.size() != args.size) {
      err << who << "endpoint table lists " << config.endpoints.size()
          << " ranks but --size is " << args.size << std::endl;
      return 2;
    }
    if (args.rank >= args.size) {
      err << who << "rank outside job of size " << args.size << std::endl;
      return 2;
    }
    params = json::parse(args.params_json);
    workload = &workloads::require_workload(args.workload, params);
  } catch (const std::exception& e) {
    err << who << e.what() << std::endl;
    return 2;
  }

  config.rank = args.rank;
  config.size = args.size;
  config.job_token = args.job_token;
  config.listen_fd = args.listen_fd;
  config.peers_prebound = args.listen_fd >= 0;
  config.out = &out;
  try {
    RankContext ctx(std::move(config));
    const int rc = workload->body(ctx, params);
    out.flush();
    if (rc != 0) return rc;
    ctx.finalize();
    return 0;
  } catch (const std::exception& e) {
    out.flush();
    err << who << e.what() << std::endl;
    return kRuntimeFailureExit;
  }
}

}  // namespace hpcaas::rankmsg
