#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "../src/rankmsg/socket_io.hpp"
#include "hpcaas/error.hpp"
#include "hpcaas/rankmsg/context.hpp"
#include "hpcaas/rankmsg/envelope.hpp"
#include "hpcaas/rankmsg/launcher.hpp"
#include "hpcaas/record_store.hpp"
#include "support/proc_scan.hpp"
#include "support/test_env.hpp"

using namespace hpcaas;
using namespace hpcaas::rankmsg;
using namespace hpcaas::testing;
using namespace std::chrono_literals;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Io;
}

JobOutput launch(std::uint32_t n, const std::string& workload, const std::string& params = "{}") {
  LaunchRequest r;
  r.num_processes = n;
  r.workload_id = workload;
  r.params_json = params;
  r.worker_exe = worker_binary();
  r.timeout = 60s;
  return launch_local(r);
}

// In-process job: one RankContext per thread over pre-bound listeners.
struct LocalMesh {
  std::vector<Endpoint> endpoints;
  std::vector<int> listeners;

  explicit LocalMesh(std::uint32_t n) {
    for (std::uint32_t r = 0; r < n; ++r) {
      auto fd = detail::listen_on({"127.0.0.1", 0});
      endpoints.push_back({"127.0.0.1", detail::local_port(fd.get())});
      listeners.push_back(fd.release());
    }
  }

  RankConfig config(std::uint32_t rank, std::ostream* out = nullptr) const {
    RankConfig c;
    c.rank = rank;
    c.size = static_cast<std::uint32_t>(endpoints.size());
    c.endpoints = endpoints;
    c.job_token = "mesh-test";
    c.listen_fd = listeners[rank];
    c.peers_prebound = true;
    c.connect_deadline = 5s;
    c.out = out;
    return c;
  }
};

}  // namespace

TEST(Envelope, WireLayoutIsBigEndian) {
  const std::string frame = encode({1, 2, 0x01020304, "hi"});
  const std::string expected("RMSG\0\0\0\1\0\0\0\2\1\2\3\4\0\0\0\2hi", 22);
  EXPECT_EQ(frame, expected);
}

TEST(Envelope, RoundTripIncludingEmptyPayload) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    Envelope e;
    e.src = static_cast<std::uint32_t>(rng());
    e.dst = e.src + 1 + static_cast<std::uint32_t>(rng() % 1000);
    e.tag = static_cast<std::uint32_t>(rng());
    e.payload.resize(i == 0 ? 0 : rng() % 512);
    for (auto& c : e.payload) c = static_cast<char>(rng());
    const std::string frame = encode(e);
    ASSERT_EQ(frame.size(), kHeaderSize + e.payload.size());
    ASSERT_EQ(decode(frame), e);
  }
  EXPECT_EQ(decode(encode({0, 1, 0, ""})).payload, "");
}

TEST(Envelope, RejectsMalformedFrames) {
  const std::string good = encode({0, 1, 0, "abc"});
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of([&] { decode(bad_magic); }), ErrorCode::Transport);
  EXPECT_EQ(code_of([&] { decode(good.substr(0, good.size() - 1)); }), ErrorCode::Transport);
  EXPECT_EQ(code_of([&] { decode(good + "x"); }), ErrorCode::Transport);
  EXPECT_EQ(code_of([&] { decode(good.substr(0, 10)); }), ErrorCode::Transport);
  std::string self = good;
  self[11] = 0;  // dst := 0 == src
  EXPECT_EQ(code_of([&] { decode(self); }), ErrorCode::Transport);
  EXPECT_EQ(code_of([] { encode({3, 3, 0, ""}); }), ErrorCode::Usage);
  std::string huge = good;
  huge[16] = '\x7f';
  EXPECT_EQ(code_of([&] { decode(huge); }), ErrorCode::Transport);
}

TEST(Endpoints, ParseAndFormat) {
  EXPECT_EQ(parse_endpoint("127.0.0.1:4000"), (Endpoint{"127.0.0.1", 4000}));
  EXPECT_EQ(parse_endpoint("[::1]:5"), (Endpoint{"::1", 5}));
  for (const char* bad : {"", "127.0.0.1", "host:1", "1.2.3.4:70000", "[::1:5", "1.2.3.4:x"}) {
    EXPECT_EQ(code_of([&] { parse_endpoint(bad); }), ErrorCode::Usage) << bad;
  }
  const std::vector<Endpoint> eps = {{"127.0.0.1", 1}, {"::1", 2}};
  EXPECT_EQ(parse_endpoint_table(format_endpoint_table(eps)), eps);
  EXPECT_EQ(parse_endpoint_table("# c\n1 127.0.0.1:2\n0 127.0.0.1:1\n").size(), 2u);
  EXPECT_EQ(code_of([] { parse_endpoint_table("0 127.0.0.1:1\n0 127.0.0.1:2\n"); }), ErrorCode::Usage);
  EXPECT_EQ(code_of([] { parse_endpoint_table("1 127.0.0.1:1\n"); }), ErrorCode::Usage);
  EXPECT_EQ(code_of([] { parse_endpoint_table("zero 127.0.0.1:1\n"); }), ErrorCode::Usage);
}

TEST(RankContext, SendRecvRoundTripAndFifo) {
  LocalMesh mesh(2);
  std::thread sender([&] {
    RankContext ctx(mesh.config(1));
    ctx.send(0, "7");
    ctx.send(0, "A");
    ctx.send(0, "B");
    ctx.finalize();
  });
  RankContext ctx(mesh.config(0));
  EXPECT_EQ(ctx.recv(1), "7");
  EXPECT_EQ(ctx.recv(1), "A");
  EXPECT_EQ(ctx.recv(1), "B");
  ctx.finalize();
  sender.join();
}

TEST(RankContext, MatchesOnSourceAndTag) {
  LocalMesh mesh(3);
  std::thread r2([&] {
    RankContext ctx(mesh.config(2));
    ctx.send(0, "from two");
    ctx.finalize();
  });
  std::thread r1([&] {
    RankContext ctx(mesh.config(1));
    std::this_thread::sleep_for(100ms);  // rank 2's message is queued first
    ctx.send(0, 5, "tagged");
    ctx.send(0, "from one");
    ctx.finalize();
  });
  RankContext ctx(mesh.config(0));
  EXPECT_EQ(ctx.recv(1), "from one");
  EXPECT_EQ(ctx.recv(1, 5), "tagged");
  EXPECT_EQ(ctx.recv(2), "from two");
  ctx.finalize();
  r1.join();
  r2.join();
}

TEST(RankContext, UsageErrors) {
  LocalMesh mesh(2);
  std::thread peer([&] {
    RankContext ctx(mesh.config(1));
    ctx.finalize();
  });
  RankContext ctx(mesh.config(0));
  EXPECT_EQ(code_of([&] { ctx.send(0, "x"); }), ErrorCode::Usage);
  EXPECT_EQ(code_of([&] { ctx.send(2, "x"); }), ErrorCode::Usage);
  EXPECT_EQ(code_of([&] { ctx.recv(0); }), ErrorCode::Usage);
  EXPECT_EQ(code_of([&] { ctx.send(1, kFinTag, "x"); }), ErrorCode::Usage);
  ctx.finalize();
  peer.join();
}

TEST(RankContext, PeerGoneUnblocksRecvWithError) {
  LocalMesh mesh(2);
  std::thread peer([&] {
    RankContext ctx(mesh.config(1));
    // leaves without sending or finalizing
  });
  RankContext ctx(mesh.config(0));
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { ctx.recv(1); }), ErrorCode::Transport);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
  peer.join();
}

TEST(RankContext, WrongJobTokenIsRejected) {
  LocalMesh mesh(2);
  std::thread intruder([&] {
    auto c = mesh.config(1);
    c.job_token = "other-job";
    try {
      RankContext ctx(c);
      ctx.send(0, "sneaky");
    } catch (const Error&) {
    }
  });
  RankContext ctx(mesh.config(0));
  EXPECT_EQ(code_of([&] { ctx.recv(1); }), ErrorCode::Transport);
  intruder.join();
}

TEST(Launch, EchoSum) {
  EXPECT_NE(launch(1, "echo_sum").output.find("sum=0"), std::string::npos);
  const auto four = launch(4, "echo_sum");
  EXPECT_EQ(four.exit_code, 0) << four.output;
  EXPECT_NE(four.output.find("sum=6"), std::string::npos);
  const auto eight = launch(8, "echo_sum");
  EXPECT_EQ(eight.exit_code, 0) << eight.output;
  EXPECT_NE(eight.output.find("sum=28"), std::string::npos);
  EXPECT_GT(eight.elapsed_ms, 0.0);
}

TEST(Launch, RankSetIsDeterministic) {
  auto ranks = [] {
    const auto out = launch(5, "rank_report").output;
    std::set<std::string> lines;
    std::istringstream in(out);
    for (std::string l; std::getline(in, l);) lines.insert(l);
    return lines;
  };
  const auto first = ranks();
  EXPECT_EQ(first, ranks());
  EXPECT_EQ(first, (std::set<std::string>{"rank 0 of 5", "[rank 1] rank 1 of 5",
                                          "[rank 2] rank 2 of 5", "[rank 3] rank 3 of 5",
                                          "[rank 4] rank 4 of 5"}));
}

TEST(Launch, FailingRankFailsJob) {
  const auto r = launch(4, "fail_on_rank", R"({"rank":2,"code":5})");
  EXPECT_EQ(r.exit_code, 5);
  EXPECT_NE(r.output.find("[rank 2] rank 2 failing with code 5"), std::string::npos);
  EXPECT_EQ(processes_mentioning(r.job_token), 0);
}

TEST(Launch, CrashedSenderDoesNotDeadlockReceiver) {
  const auto start = std::chrono::steady_clock::now();
  const auto r = launch(3, "crash_before_send");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_FALSE(r.timed_out);
  EXPECT_EQ(r.output.find("unexpected message"), std::string::npos);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 10s);
  EXPECT_EQ(processes_mentioning(r.job_token), 0);
}

TEST(Launch, TimeoutKillsJob) {
  LaunchRequest req;
  req.num_processes = 2;
  req.workload_id = "montecarlo_pi";
  req.params_json = R"({"max_tries":100000000000})";
  req.worker_exe = worker_binary();
  req.timeout = 300ms;
  const auto r = launch_local(req);
  EXPECT_TRUE(r.timed_out);
  EXPECT_EQ(r.exit_code, 124);
  EXPECT_EQ(processes_mentioning(r.job_token), 0);
}

TEST(Launch, RejectsBadRequests) {
  EXPECT_EQ(code_of([] { launch(1, "no_such_workload"); }), ErrorCode::Validation);
  EXPECT_EQ(code_of([] { launch(0, "echo_sum"); }), ErrorCode::Validation);
  EXPECT_EQ(code_of([] { launch(2, "echo_sum", "not json"); }), ErrorCode::Validation);
  EXPECT_EQ(code_of([] { launch(2, "montecarlo_pi", R"({"max_tries":0})"); }),
            ErrorCode::Validation);
}

TEST(Launch, RandomSchedulesDeliverExactlyOnceInOrder) {
  std::mt19937 rng(17);
  for (std::uint32_t n = 2; n <= 8; ++n) {
    for (int trial = 0; trial < 2; ++trial) {
      const std::string params = "{\"seed\":" + std::to_string(rng()) +
                                 ",\"max_messages\":12,\"max_payload\":300,\"jitter_us\":200}";
      const auto r = launch(n, "message_schedule", params);
      EXPECT_EQ(r.exit_code, 0) << "n=" << n << "\n" << r.output;
      EXPECT_NE(r.output.find("schedule ok"), std::string::npos) << r.output;
      EXPECT_NE(r.output.find("mismatches=0"), std::string::npos) << r.output;
    }
  }
}

TEST(Launch, NoOrphansAcrossRepeatedLaunches) {
  std::vector<std::string> tokens;
  for (int i = 0; i < 20; ++i) {
    const auto r = launch(1 + i % 4, i % 5 == 4 ? "crash_before_send" : "echo_sum");
    tokens.push_back(r.job_token);
  }
  for (const auto& t : tokens) EXPECT_EQ(processes_mentioning(t), 0) << t;
}

TEST(Worker, ArgumentErrorsExitNonZero) {
  ScratchDir dir;
  std::ostringstream out, err;
  WorkerArgs args;
  args.rank = 0;
  args.size = 2;
  args.workload = "echo_sum";
  args.endpoints_file = dir / "missing";
  EXPECT_NE(worker_entry(args, out, err), 0);

  write_file_atomically(dir / "bad", "0 not-an-endpoint\n");
  args.endpoints_file = dir / "bad";
  EXPECT_NE(worker_entry(args, out, err), 0);

  write_file_atomically(dir / "one", "0 127.0.0.1:1\n");
  args.endpoints_file = dir / "one";
  EXPECT_NE(worker_entry(args, out, err), 0);  // size 2 vs one endpoint
  EXPECT_NE(err.str().find("--size"), std::string::npos);

  args.size = 1;
  args.workload = "no_such";
  EXPECT_NE(worker_entry(args, out, err), 0);
}

TEST(Worker, ConsistentArgumentsExitZero) {
  ScratchDir dir;
  auto fd = detail::listen_on({"127.0.0.1", 0});
  write_file_atomically(dir / "eps",
                        format_endpoint_table({{"127.0.0.1", detail::local_port(fd.get())}}));
  WorkerArgs args;
  args.size = 1;
  args.workload = "echo_sum";
  args.endpoints_file = dir / "eps";
  args.listen_fd = fd.release();
  std::ostringstream out, err;
  EXPECT_EQ(worker_entry(args, out, err), 0) << err.str();
  EXPECT_EQ(out.str(), "sum=0\n");
}
