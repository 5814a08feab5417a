#include <gtest/gtest.h>

#include <random>

#include "hpcaas/cluster_config.hpp"
#include "hpcaas/error.hpp"
#include "hpcaas/keypair.hpp"
#include "support/scripted_transport.hpp"
#include "support/test_env.hpp"

using namespace hpcaas;
using namespace hpcaas::testing;

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

struct ClusterFixture : ::testing::Test {
  ScratchDir dir;
  ManualClock clock;
  RecordStore store{dir.path()};
  AuthService auth{store, fast_auth(), clock.clock()};
  std::shared_ptr<ScriptedTransport> transport = std::make_shared<ScriptedTransport>();
  ClusterConfig cluster{store, auth, transport, clock.clock(), std::chrono::milliseconds(200)};
  std::string admin;
  std::string regular;

  void SetUp() override {
    auth.bootstrap_admin("admin", "pw");
    admin = auth.login("admin", "pw").token;
    auth.create_user(admin, "alice", "pw", Role::Regular);
    regular = auth.login("alice", "pw").token;
  }
};

}  // namespace

TEST(Addresses, Syntax) {
  for (const char* ok : {"10.0.0.2", "::1", "fe80::1", "node-1", "pi.cluster.local", "a"}) {
    EXPECT_TRUE(is_valid_address(ok)) << ok;
  }
  for (const char* bad : {"", "10.0.0", "999.1.1.1", "-host", "host-", "a..b", "has space",
                          "x;rm -rf", "[::1]"}) {
    EXPECT_FALSE(is_valid_address(bad)) << bad;
  }
  EXPECT_TRUE(is_valid_login_name("pi"));
  EXPECT_FALSE(is_valid_login_name("-oProxyCommand=x"));
  EXPECT_FALSE(is_valid_login_name(""));
  EXPECT_FALSE(is_valid_login_name("a b"));
}

TEST_F(ClusterFixture, AddFirstMasterIsIdOne) {
  const auto n = cluster.add_node(admin, "10.0.0.2", "pi", NodeRole::Master);
  EXPECT_EQ(n.id, 1u);
  EXPECT_EQ(n.role, NodeRole::Master);
}

TEST_F(ClusterFixture, SecondMasterConflicts) {
  cluster.add_node(admin, "10.0.0.2", "pi", NodeRole::Master);
  EXPECT_EQ(code_of([&] { cluster.add_node(admin, "10.0.0.3", "pi", NodeRole::Master); }),
            ErrorCode::Conflict);
}

TEST_F(ClusterFixture, RegularUserCannotTouchRegistry) {
  EXPECT_EQ(code_of([&] { cluster.add_node(regular, "10.0.0.2", "pi", NodeRole::Master); }),
            ErrorCode::Forbidden);
  EXPECT_EQ(code_of([&] { cluster.list_nodes(regular); }), ErrorCode::Forbidden);
  EXPECT_EQ(code_of([&] { cluster.list_nodes("bogus"); }), ErrorCode::Unauthorized);
}

TEST_F(ClusterFixture, BadAddressAndDuplicatePair) {
  EXPECT_EQ(code_of([&] { cluster.add_node(admin, "not a host", "pi", NodeRole::Slave); }),
            ErrorCode::Validation);
  cluster.add_node(admin, "10.0.0.2", "pi", NodeRole::Slave);
  EXPECT_EQ(code_of([&] { cluster.add_node(admin, "10.0.0.2", "pi", NodeRole::Slave); }),
            ErrorCode::Conflict);
  EXPECT_NO_THROW(cluster.add_node(admin, "10.0.0.2", "other", NodeRole::Slave));
}

TEST_F(ClusterFixture, UpdateDeleteList) {
  EXPECT_TRUE(cluster.list_nodes(admin).empty());
  cluster.add_node(admin, "10.0.0.2", "pi", NodeRole::Master);
  NodeUpdate u;
  u.address = "10.0.0.9";
  const auto updated = cluster.update_node(admin, 1, u);
  EXPECT_EQ(updated.id, 1u);
  EXPECT_EQ(updated.address, "10.0.0.9");
  EXPECT_TRUE(cluster.delete_node(admin, 1));
  EXPECT_TRUE(cluster.list_nodes(admin).empty());
  EXPECT_EQ(code_of([&] { cluster.update_node(admin, 1, u); }), ErrorCode::NotFound);
  EXPECT_EQ(code_of([&] { cluster.delete_node(admin, 1); }), ErrorCode::NotFound);
}

TEST_F(ClusterFixture, DemotingOnlyMasterWithSlavesConflicts) {
  cluster.add_node(admin, "10.0.0.1", "pi", NodeRole::Master);
  cluster.add_node(admin, "10.0.0.2", "pi", NodeRole::Slave);
  NodeUpdate u;
  u.role = NodeRole::Slave;
  EXPECT_EQ(code_of([&] { cluster.update_node(admin, 1, u); }), ErrorCode::Conflict);
}

TEST_F(ClusterFixture, ListAscendingAndPersisted) {
  cluster.add_node(admin, "10.0.0.3", "pi", NodeRole::Slave);
  cluster.add_node(admin, "10.0.0.1", "pi", NodeRole::Master);
  const auto nodes = cluster.list_nodes(admin);
  ASSERT_EQ(nodes.size(), 2u);
  EXPECT_LT(nodes[0].id, nodes[1].id);
  ClusterConfig reopened(store, auth, transport, clock.clock());
  EXPECT_EQ(reopened.list_nodes(admin), nodes);
}

TEST_F(ClusterFixture, HealthProbeOutcomes) {
  cluster.add_node(admin, "10.0.0.1", "pi", NodeRole::Master);
  cluster.add_node(admin, "10.0.0.2", "pi", NodeRole::Slave);
  cluster.add_node(admin, "10.0.0.3", "pi", NodeRole::Slave);
  transport->probes["10.0.0.2"] = ScriptedTransport::ProbeMode::Refuse;
  transport->probes["10.0.0.3"] = ScriptedTransport::ProbeMode::Hang;
  const auto before = cluster.list_nodes(admin);

  EXPECT_TRUE(cluster.check_node(admin, 1).reachable);
  const auto refused = cluster.check_node(admin, 2);
  EXPECT_FALSE(refused.reachable);
  EXPECT_EQ(refused.reason, "connection refused");
  const auto start = std::chrono::steady_clock::now();
  const auto slow = cluster.check_node(admin, 3);
  EXPECT_FALSE(slow.reachable);
  EXPECT_EQ(slow.reason, "timeout");
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(700));
  EXPECT_EQ(code_of([&] { cluster.check_node(admin, 42); }), ErrorCode::NotFound);
  EXPECT_EQ(cluster.list_nodes(admin), before);
}

TEST_F(ClusterFixture, NeverTwoMastersUnderRandomOps) {
  std::mt19937 rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto nodes = cluster.list_nodes(admin);
    const int op = static_cast<int>(rng() % 3);
    const NodeRole role = rng() % 3 == 0 ? NodeRole::Master : NodeRole::Slave;
    try {
      if (op == 0 || nodes.empty()) {
        cluster.add_node(admin, "10.0.1." + std::to_string(rng() % 40), "u" + std::to_string(rng() % 2),
                         role);
      } else if (op == 1) {
        NodeUpdate u;
        u.role = role;
        cluster.update_node(admin, nodes[rng() % nodes.size()].id, u);
      } else {
        cluster.delete_node(admin, nodes[rng() % nodes.size()].id);
      }
    } catch (const Error& e) {
      EXPECT_TRUE(e.code() == ErrorCode::Conflict) << e.what();
    }
    const auto after = cluster.list_nodes(admin);
    const auto masters = std::count_if(after.begin(), after.end(),
                                       [](const NodeRecord& n) { return n.role == NodeRole::Master; });
    ASSERT_LE(masters, 1);
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& n : after) pairs.emplace(n.address, n.login_name);
    ASSERT_EQ(pairs.size(), after.size());
  }
}

TEST(Keypair, StableSingleLineNoPrivateMaterial) {
  ScratchDir dir;
  const auto a = GatewayKeypair::load_or_generate(dir.path(), 2048);
  const auto b = GatewayKeypair::load_or_generate(dir.path(), 2048);
  EXPECT_EQ(a.public_key_line(), b.public_key_line());
  EXPECT_EQ(a.public_key_line().find('\n'), std::string::npos);
  EXPECT_EQ(a.public_key_line().rfind("ssh-rsa AAAAB3NzaC1yc2E", 0), 0u);
  const std::string pem = read_file(a.private_key_path());
  EXPECT_NE(a.public_key_line(), pem);
  EXPECT_EQ(a.public_key_line().find("PRIVATE"), std::string::npos);
  EXPECT_EQ(std::filesystem::status(a.private_key_path()).permissions() &
                std::filesystem::perms::group_all,
            std::filesystem::perms::none);
  EXPECT_EQ(rsa_public_key_line(pem, "hpcaas-gateway"), a.public_key_line());
}
