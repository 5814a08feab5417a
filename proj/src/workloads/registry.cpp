#include "hpcaas/workloads/registry.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ostream>
#include <random>
#include <thread>

#include "hpcaas/error.hpp"
#include "hpcaas/workloads/pi.hpp"
#include "hpcaas/workloads/schedule.hpp"

using nlohmann::json;

namespace hpcaas::workloads {

namespace {

void require_object(const json& params) {
  if (!params.is_null() && !params.is_object()) {
    fail(ErrorCode::Validation, "workload params must be a JSON object");
  }
}

std::uint64_t uint_param(const json& params, const char* key, std::uint64_t fallback) {
  if (params.is_null() || !params.contains(key)) return fallback;
  try {
    return params.at(key).get<std::uint64_t>();
  } catch (const json::exception&) {
    fail(ErrorCode::Validation, std::string("param '") + key + "' must be an unsigned integer");
  }
}

// Rank r > 0 sends r to rank 0, which prints the sum.
int echo_sum(rankmsg::RankContext& ctx, const json&) {
  if (ctx.rank() != 0) {
    ctx.send(0, encode_u64(ctx.rank()));
    return 0;
  }
  std::uint64_t sum = 0;
  for (std::uint32_t r = 1; r < ctx.size(); ++r) sum += decode_u64(ctx.recv(r));
  ctx.out() << "sum=" << sum << std::endl;
  return 0;
}

// Every rank reports itself; the launcher prefixes lines from ranks > 0.
int rank_report(rankmsg::RankContext& ctx, const json&) {
  ctx.out() << "rank " << ctx.rank() << " of " << ctx.size() << std::endl;
  return 0;
}

// Test fixture: one rank exits with a chosen code, the others finish normally.
int fail_on_rank(rankmsg::RankContext& ctx, const json& params) {
  const auto rank = uint_param(params, "rank", 1);
  const auto code = uint_param(params, "code", 1);
  if (ctx.rank() == rank) {
    ctx.out() << "rank " << rank << " failing with code " << code << std::endl;
    return static_cast<int>(code);
  }
  return 0;
}

// Test fixture: rank 1 dies abruptly before sending; rank 0 waits on it.
int crash_before_send(rankmsg::RankContext& ctx, const json&) {
  if (ctx.rank() == 1) {
    std::_Exit(3);
  }
  if (ctx.rank() == 0 && ctx.size() > 1) {
    ctx.recv(1);
    ctx.out() << "unexpected message from rank 1" << std::endl;
  }
  return 0;
}

int message_schedule(rankmsg::RankContext& ctx, const json& params) {
  const ScheduleParams sp = ScheduleParams::from_json(params);
  const MessageSchedule schedule(sp, ctx.size());
  std::mt19937_64 order(sp.seed * 1'000'003ull + ctx.rank());
  auto jitter = [&] {
    if (sp.jitter_us == 0) return;
    std::this_thread::sleep_for(std::chrono::microseconds(order() % (sp.jitter_us + 1)));
  };

  // Sends: random interleaving across destinations, per-destination order kept.
  std::vector<std::uint32_t> next_send(ctx.size(), 0);
  std::vector<std::uint32_t> pending;
  for (std::uint32_t d = 0; d < ctx.size(); ++d) {
    for (std::uint32_t k = 0; k < schedule.count(ctx.rank(), d); ++k) pending.push_back(d);
  }
  std::shuffle(pending.begin(), pending.end(), order);
  for (std::uint32_t d : pending) {
    const std::uint32_t k = next_send[d]++;
    ctx.send(d, schedule.tag(ctx.rank(), d, k), schedule.payload(ctx.rank(), d, k));
    jitter();
  }

  // Receives: random interleaving across sources, each source consumed in
  // sequence order. Any loss, duplicate or reordering shows up as a payload
  // mismatch at some step.
  std::uint64_t received = 0;
  std::uint64_t mismatches = 0;
  std::vector<std::uint32_t> next_recv(ctx.size(), 0);
  std::vector<std::uint32_t> sources;
  for (std::uint32_t s = 0; s < ctx.size(); ++s) {
    for (std::uint32_t k = 0; k < schedule.count(s, ctx.rank()); ++k) sources.push_back(s);
  }
  std::shuffle(sources.begin(), sources.end(), order);
  for (std::uint32_t s : sources) {
    const std::uint32_t k = next_recv[s]++;
    const std::string got = ctx.recv(s, schedule.tag(s, ctx.rank(), k));
    if (got != schedule.payload(s, ctx.rank(), k)) ++mismatches;
    ++received;
    jitter();
  }

  constexpr std::uint32_t kSummaryTag = 100;
  if (ctx.rank() != 0) {
    ctx.send(0, kSummaryTag, encode_u64(received) + encode_u64(mismatches));
    return mismatches == 0 ? 0 : 1;
  }
  std::uint64_t total_received = received;
  std::uint64_t total_mismatches = mismatches;
  for (std::uint32_t r = 1; r < ctx.size(); ++r) {
    const std::string summary = ctx.recv(r, kSummaryTag);
    total_received += decode_u64(std::string_view(summary).substr(0, 8));
    total_mismatches += decode_u64(std::string_view(summary).substr(8, 8));
  }
  const std::uint64_t expected = schedule.total();
  ctx.out() << "messages expected=" << expected << " received=" << total_received
            << " mismatches=" << total_mismatches << std::endl;
  if (total_received != expected || total_mismatches != 0) {
    ctx.out() << "schedule FAILED" << std::endl;
    return 1;
  }
  ctx.out() << "schedule ok" << std::endl;
  return 0;
}

const std::vector<Workload>& registry() {
  static const std::vector<Workload> workloads = {
      {"montecarlo_pi", "Monte Carlo estimate of pi; params {max_tries, seed}",
       [](const json& p) { PiParams::from_json(p); },
       [](rankmsg::RankContext& ctx, const json& p) {
         return pi_rank_body(ctx, PiParams::from_json(p));
       }},
      {"echo_sum", "each rank r > 0 sends r to rank 0, which prints sum=<total>", require_object,
       echo_sum},
      {"rank_report", "every rank prints its rank and the job size", require_object,
       rank_report},
      {"fail_on_rank", "test fixture: rank {rank} exits with {code}",
       [](const json& p) {
         require_object(p);
         uint_param(p, "rank", 1);
         uint_param(p, "code", 1);
       },
       fail_on_rank},
      {"crash_before_send", "test fixture: rank 1 dies before sending to rank 0", require_object,
       crash_before_send},
      {"message_schedule", "test fixture: seeded random point-to-point traffic, verified",
       [](const json& p) { ScheduleParams::from_json(p); }, message_schedule},
  };
  return workloads;
}

}  // namespace

const Workload* find_workload(std::string_view id) {
  const auto& all = registry();
  const auto it = std::find_if(all.begin(), all.end(), [&](const Workload& w) { return w.id == id; });
  return it == all.end() ? nullptr : &*it;
}

std::vector<std::string> workload_ids() {
  std::vector<std::string> ids;
  for (const auto& w : registry()) ids.push_back(w.id);
  return ids;
}

const Workload& require_workload(std::string_view id, const json& params) {
  const Workload* w = find_workload(id);
  if (w == nullptr) fail(ErrorCode::Validation, "unknown workload '" + std::string(id) + "'");
  w->validate(params);
  return *w;
}

}  // namespace hpcaas::workloads
