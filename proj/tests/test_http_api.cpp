#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "support/gateway_fixture.hpp"

using namespace hpcaas;
using namespace hpcaas::testing;
using json = nlohmann::json;

namespace {

json parse(const httplib::Result& r) { return json::parse(r->body); }

std::string pi_manifest(std::uint64_t tries) {
  return json{{"workload", "montecarlo_pi"}, {"params", {{"max_tries", tries}, {"seed", 42}}}}
      .dump();
}

json wait_for_job(const LiveGateway& gw, std::uint64_t id, const std::string& token) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
  json job;
  while (std::chrono::steady_clock::now() < deadline) {
    auto r = gw.get("/api/jobs/" + std::to_string(id), token);
    job = parse(r);
    if (job["status"] == "completed" || job["status"] == "failed") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return job;
}

}  // namespace

TEST(HttpApi, HealthOnFreshDataDir) {
  ScratchDir dir;
  Gateway gw(test_gateway_config(dir / "data"), std::make_shared<ScriptedTransport>());
  ApiServer server(gw);
  const int port = server.start({"127.0.0.1", 0});
  httplib::Client c("127.0.0.1", port);
  auto r = c.Get("/api/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(parse(r)["status"], "ok");
  EXPECT_TRUE(std::filesystem::is_directory(dir / "data" / "store"));
  EXPECT_TRUE(std::filesystem::is_directory(dir / "data" / "files"));
  auto missing = c.Get("/api/nope");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(parse(missing)["code"], "not_found");
}

TEST(HttpApi, PortInUseFailsStartup) {
  ScratchDir dir;
  Gateway gw(test_gateway_config(dir / "data"), std::make_shared<ScriptedTransport>());
  ApiServer first(gw);
  const int port = first.start({"127.0.0.1", 0});
  ApiServer second(gw);
  try {
    second.start({"127.0.0.1", port});
    FAIL() << "second bind succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(HttpApi, DataDirWithoutParentIsRejected) {
  ScratchDir dir;
  try {
    Gateway gw(test_gateway_config(dir / "missing" / "data"),
               std::make_shared<ScriptedTransport>());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
    EXPECT_NE(std::string(e.what()).find("data_dir"), std::string::npos);
  }
}

TEST(HttpApi, ConfigValidationNamesField) {
  ScratchDir dir;
  auto c = test_gateway_config(dir / "data");
  c.max_processes = 0;
  try {
    validate_config(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Validation);
    EXPECT_NE(std::string(e.what()).find("max_processes"), std::string::npos);
  }
}

TEST(HttpApi, ParseBind) {
  EXPECT_EQ(parse_bind("0.0.0.0:8080").host, "0.0.0.0");
  EXPECT_EQ(parse_bind("0.0.0.0:8080").port, 8080);
  EXPECT_EQ(parse_bind("[::1]:9000").host, "::1");
  EXPECT_EQ(parse_bind(":81").host, "0.0.0.0");
  EXPECT_THROW(parse_bind("localhost"), Error);
  EXPECT_THROW(parse_bind("h:99999"), Error);
}

TEST(HttpApi, LoginAndBadCredentials) {
  ScratchDir dir;
  LiveGateway gw(dir / "data");
  auto ok = gw.post_json("/api/login", {{"username", "alice"}, {"password", "alice-pass"}}, "");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  const json body = parse(ok);
  EXPECT_EQ(body["role"], "regular");
  EXPECT_FALSE(body["token"].get<std::string>().empty());
  EXPECT_TRUE(body.contains("expires_at"));

  auto bad = gw.post_json("/api/login", {{"username", "alice"}, {"password", "nope"}}, "");
  EXPECT_EQ(bad->status, 401);
  auto ghost = gw.post_json("/api/login", {{"username", "ghost"}, {"password", "nope"}}, "");
  EXPECT_EQ(ghost->status, 401);
  EXPECT_EQ(parse(ghost)["code"], parse(bad)["code"]);
  auto junk = gw.client().Post("/api/login", "not json", "application/json");
  EXPECT_EQ(junk->status, 422);
}

TEST(HttpApi, AuthorizationMatrix) {
  ScratchDir dir;
  const auto result = run_auth_matrix(dir / "data");
  EXPECT_EQ(result.checked, static_cast<int>(route_table().size() * 4));
  for (const auto& m : result.mismatches) ADD_FAILURE() << m;
}

TEST(HttpApi, RegularUserRouteExamples) {
  ScratchDir dir;
  LiveGateway gw(dir / "data");
  EXPECT_EQ(gw.get("/api/nodes", gw.user_token())->status, 403);
  EXPECT_EQ(gw.get("/api/public-key", gw.user_token())->status, 403);
  EXPECT_EQ(gw.get("/api/files", gw.user_token())->status, 200);
  EXPECT_EQ(gw.get("/api/files", "")->status, 401);
  EXPECT_EQ(gw.get("/api/files", "forged")->status, 401);
}

TEST(HttpApi, NodeAdministration) {
  ScratchDir dir;
  LiveGateway gw(dir / "data");
  const auto& t = gw.admin_token();
  auto added = gw.post_json("/api/nodes",
                            {{"address", "10.0.0.2"}, {"login_name", "pi"}, {"role", "master"}}, t);
  ASSERT_EQ(added->status, 200) << added->body;
  const auto id = parse(added)["id"].get<std::uint64_t>();
  auto dup = gw.post_json("/api/nodes",
                          {{"address", "10.0.0.3"}, {"login_name", "pi"}, {"role", "master"}}, t);
  EXPECT_EQ(dup->status, 409);
  auto list = gw.get("/api/nodes", t);
  EXPECT_EQ(parse(list).size(), 1u);
  auto key = gw.get("/api/public-key", t);
  ASSERT_EQ(key->status, 200);
  EXPECT_EQ(parse(key)["public_key"].get<std::string>().rfind("ssh-rsa ", 0), 0u);
  auto upd = gw.client().Put("/api/nodes/" + std::to_string(id), LiveGateway::auth_header(t),
                             json{{"login_name", "ubuntu"}}.dump(), "application/json");
  EXPECT_EQ(upd->status, 200);
  EXPECT_EQ(parse(upd)["login_name"], "ubuntu");
  auto del = gw.client().Delete("/api/nodes/" + std::to_string(id), LiveGateway::auth_header(t));
  EXPECT_EQ(del->status, 200);
  auto gone = gw.client().Delete("/api/nodes/" + std::to_string(id), LiveGateway::auth_header(t));
  EXPECT_EQ(gone->status, 404);
  auto bad_id = gw.client().Delete("/api/nodes/abc", LiveGateway::auth_header(t));
  EXPECT_EQ(bad_id->status, 404);
}

TEST(HttpApi, UploadListDeleteAndSizeCap) {
  ScratchDir dir;
  LiveGateway gw(dir / "data");
  auto up = gw.upload("pi.json", pi_manifest(1000), gw.user_token());
  ASSERT_EQ(up->status, 200) << up->body;
  const auto pointer = parse(up)["pointer"].get<std::uint64_t>();
  auto list = gw.get("/api/files", gw.user_token());
  ASSERT_EQ(parse(list).size(), 1u);
  EXPECT_EQ(parse(list)[0]["pointer"], pointer);
  EXPECT_EQ(parse(gw.get("/api/files", gw.admin_token())).size(), 1u);  // admins see all

  auto too_big = gw.upload("big.bin", std::string(64 * 1024 + 1, 'x'), gw.user_token());
  ASSERT_TRUE(too_big);
  EXPECT_EQ(too_big->status, 413);
  auto way_too_big = gw.upload("huge.bin", std::string(2u << 20, 'x'), gw.user_token());
  if (way_too_big) EXPECT_EQ(way_too_big->status, 413);

  auto not_multipart = gw.post_json("/api/files", {{"file", "x"}}, gw.user_token());
  EXPECT_EQ(not_multipart->status, 422);

  gw.post_json("/api/users", {{"username", "carol"}, {"password", "carol-pass"}},
               gw.admin_token());
  auto others = gw.client().Delete("/api/files/" + std::to_string(pointer),
                                   LiveGateway::auth_header(gw.login("carol", "carol-pass")));
  EXPECT_EQ(others->status, 403);
  auto del = gw.client().Delete("/api/files/" + std::to_string(pointer),
                                LiveGateway::auth_header(gw.user_token()));
  EXPECT_EQ(del->status, 200);
  EXPECT_EQ(parse(gw.get("/api/files", gw.user_token())).size(), 0u);
  auto again = gw.client().Delete("/api/files/" + std::to_string(pointer),
                                  LiveGateway::auth_header(gw.user_token()));
  EXPECT_EQ(again->status, 404);
}

TEST(HttpApi, EndToEndLocalPiJob) {
  ScratchDir dir;
  LiveGateway gw(dir / "data");
  auto up = gw.upload("pi.json", pi_manifest(200'000), gw.user_token());
  ASSERT_EQ(up->status, 200) << up->body;
  const auto pointer = parse(up)["pointer"].get<std::uint64_t>();
  auto sub = gw.post_json("/api/jobs", {{"pointer", pointer}, {"num_processes", 2}},
                          gw.user_token());
  ASSERT_EQ(sub->status, 200) << sub->body;
  const json queued = parse(sub);
  EXPECT_EQ(queued["backend"], "local");
  const auto id = queued["id"].get<std::uint64_t>();

  const json job = wait_for_job(gw, id, gw.user_token());
  EXPECT_EQ(job["status"], "completed") << job.dump();
  EXPECT_EQ(job["exit_code"], 0);
  auto out = gw.get("/api/jobs/" + std::to_string(id) + "/output", gw.user_token());
  ASSERT_EQ(out->status, 200);
  EXPECT_NE(out->body.find("Approx pi = "), std::string::npos) << out->body;
  EXPECT_NE(out->body.find("Total Tries = 200000"), std::string::npos);

  EXPECT_EQ(parse(gw.get("/api/jobs", gw.user_token())).size(), 1u);
  EXPECT_EQ(gw.get("/api/jobs/" + std::to_string(id), gw.admin_token())->status, 200);
  EXPECT_EQ(gw.get("/api/jobs/424242", gw.user_token())->status, 404);
}

TEST(HttpApi, JobSubmissionErrors) {
  ScratchDir dir;
  LiveGateway gw(dir / "data");
  auto up = gw.upload("pi.json", pi_manifest(1000), gw.user_token());
  const auto pointer = parse(up)["pointer"].get<std::uint64_t>();
  EXPECT_EQ(gw.post_json("/api/jobs", {{"pointer", pointer}, {"num_processes", 0}},
                         gw.user_token())->status,
            422);
  EXPECT_EQ(gw.post_json("/api/jobs", {{"pointer", 5}, {"num_processes", 1}},
                         gw.user_token())->status,
            404);
  EXPECT_EQ(gw.post_json("/api/jobs", {{"pointer", pointer}, {"num_processes", 1}},
                         gw.admin_token())->status,
            403);
  EXPECT_EQ(gw.post_json("/api/jobs",
                         {{"pointer", pointer}, {"num_processes", 1}, {"backend", "grid"}},
                         gw.user_token())->status,
            422);
  auto script = gw.upload("job.py", "print('hi')\n", gw.user_token());
  const auto py = parse(script)["pointer"].get<std::uint64_t>();
  EXPECT_EQ(gw.post_json("/api/jobs", {{"pointer", py}, {"num_processes", 1}},
                         gw.user_token())->status,
            422);
}

TEST(HttpApi, RemoteJobWithoutClusterFails) {
  ScratchDir dir;
  LiveGateway gw(dir / "data");
  auto script = gw.upload("job.py", "print('hi')\n", gw.user_token());
  const auto py = parse(script)["pointer"].get<std::uint64_t>();
  auto sub = gw.post_json("/api/jobs",
                          {{"pointer", py}, {"num_processes", 2}, {"backend", "remote"}},
                          gw.user_token());
  ASSERT_EQ(sub->status, 200) << sub->body;
  const json job = wait_for_job(gw, parse(sub)["id"].get<std::uint64_t>(), gw.user_token());
  EXPECT_EQ(job["status"], "failed");
  EXPECT_EQ(job["exit_code"], -1);
}

TEST(HttpApi, RouteDocsCoverEveryRoute) {
  const std::string md = routes_markdown();
  for (const auto& r : route_table()) {
    EXPECT_NE(md.find("| " + r.method + " | `" + r.path + "` |"), std::string::npos) << r.path;
  }
}
