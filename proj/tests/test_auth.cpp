#include <gtest/gtest.h>

#include <set>

#include "hpcaas/auth.hpp"
#include "hpcaas/error.hpp"
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

struct AuthFixture : ::testing::Test {
  ScratchDir dir;
  ManualClock clock;
  RecordStore store{dir.path()};
  AuthService auth{store, fast_auth(std::chrono::hours(24)), clock.clock()};
};

}  // namespace

TEST_F(AuthFixture, BootstrapCreatesAdminOnce) {
  const User admin = auth.bootstrap_admin("admin", "s3cret");
  EXPECT_EQ(admin.id, 1u);
  EXPECT_EQ(admin.role, Role::Admin);
  EXPECT_EQ(code_of([&] { auth.bootstrap_admin("other", "pw"); }), ErrorCode::Conflict);
}

TEST_F(AuthFixture, BootstrapRejectsEmptyUsername) {
  EXPECT_EQ(code_of([&] { auth.bootstrap_admin("", "pw"); }), ErrorCode::Validation);
}

TEST_F(AuthFixture, AdminCreatesRegularUser) {
  auth.bootstrap_admin("admin", "s3cret");
  const auto token = auth.login("admin", "s3cret").token;
  const User alice = auth.create_user(token, "alice", "pw", Role::Regular);
  EXPECT_EQ(alice.role, Role::Regular);
  EXPECT_EQ(code_of([&] { auth.create_user(token, "alice", "x", Role::Regular); }),
            ErrorCode::Conflict);
  const auto alice_token = auth.login("alice", "pw").token;
  EXPECT_EQ(code_of([&] { auth.create_user(alice_token, "bob", "x", Role::Regular); }),
            ErrorCode::Forbidden);
}

TEST_F(AuthFixture, UsernamesAreCaseSensitive) {
  auth.bootstrap_admin("admin", "s3cret");
  const auto token = auth.login("admin", "s3cret").token;
  auth.create_user(token, "Alice", "pw", Role::Regular);
  EXPECT_NO_THROW(auth.create_user(token, "alice", "pw", Role::Regular));
}

TEST_F(AuthFixture, LoginIssuesHexTokenAndUniformFailures) {
  auth.bootstrap_admin("admin", "s3cret");
  const Session s = auth.login("admin", "s3cret");
  ASSERT_EQ(s.token.size(), 32u);
  EXPECT_EQ(s.token.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_EQ(s.expires_at - s.issued_at, std::chrono::hours(24));

  std::string wrong_pw, unknown_user;
  try {
    auth.login("admin", "nope");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidCredentials);
    wrong_pw = e.what();
  }
  try {
    auth.login("ghost", "nope");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidCredentials);
    unknown_user = e.what();
  }
  EXPECT_EQ(wrong_pw, unknown_user);
}

TEST_F(AuthFixture, TwoLoginsGiveDistinctTokens) {
  auth.bootstrap_admin("admin", "s3cret");
  EXPECT_NE(auth.login("admin", "s3cret").token, auth.login("admin", "s3cret").token);
}

TEST(Tokens, NoCollisionsOverTenThousand) {
  std::set<std::string> seen;
  for (int i = 0; i < 10'000; ++i) seen.insert(generate_token());
  EXPECT_EQ(seen.size(), 10'000u);
}

TEST_F(AuthFixture, LoginTokensUniqueOverManyIssuances) {
  auth.bootstrap_admin("admin", "s3cret");
  std::set<std::string> seen;
  for (int i = 0; i < 500; ++i) seen.insert(auth.login("admin", "s3cret").token);
  EXPECT_EQ(seen.size(), 500u);
}

TEST_F(AuthFixture, AuthorizeCapabilityMatrix) {
  auth.bootstrap_admin("admin", "s3cret");
  const auto admin = auth.login("admin", "s3cret").token;
  auth.create_user(admin, "alice", "pw", Role::Regular);
  const auto regular = auth.login("alice", "pw").token;
  for (auto cap : {Capability::ManageNodes, Capability::ManageUsers, Capability::UseFiles,
                   Capability::ExecuteJobs}) {
    EXPECT_EQ(auth.authorize(admin, cap).user_id, 1u);
    const bool allowed = cap == Capability::UseFiles || cap == Capability::ExecuteJobs;
    if (allowed) {
      EXPECT_EQ(auth.authorize(regular, cap).user_id, 2u);
    } else {
      EXPECT_EQ(code_of([&] { auth.authorize(regular, cap); }), ErrorCode::Forbidden);
    }
    EXPECT_EQ(code_of([&] { auth.authorize("", cap); }), ErrorCode::Unauthorized);
    EXPECT_EQ(code_of([&] { auth.authorize(std::string(32, 'a'), cap); }),
              ErrorCode::Unauthorized);
  }
}

TEST_F(AuthFixture, ExpiredSessionsAuthorizeNothing) {
  auth.bootstrap_admin("admin", "s3cret");
  const auto token = auth.login("admin", "s3cret").token;
  clock.advance(std::chrono::hours(24) - std::chrono::milliseconds(1));
  EXPECT_NO_THROW(auth.authorize(token, Capability::UseFiles));
  clock.advance(std::chrono::milliseconds(1));
  EXPECT_EQ(code_of([&] { auth.authorize(token, Capability::UseFiles); }),
            ErrorCode::Unauthorized);
}

TEST(AuthPersistence, SessionsAndUsersSurviveReopen) {
  ScratchDir dir;
  ManualClock clock;
  std::string token;
  {
    RecordStore store(dir.path());
    AuthService auth(store, fast_auth(), clock.clock());
    auth.bootstrap_admin("admin", "s3cret");
    token = auth.login("admin", "s3cret").token;
  }
  RecordStore store(dir.path());
  AuthService auth(store, fast_auth(), clock.clock());
  EXPECT_EQ(auth.user_count(), 1u);
  EXPECT_EQ(auth.authorize(token, Capability::ManageNodes).role, Role::Admin);
  // Only a digest of the token is on disk.
  for (const auto& [id, bytes] : store.list_records("session")) {
    EXPECT_EQ(bytes.find(token), std::string::npos);
  }
}

TEST(Passwords, SaltedDigestsDifferAndVerify) {
  const auto cost = PasswordCost::minimal();
  const auto a = hash_password("same", cost);
  const auto b = hash_password("same", cost);
  EXPECT_NE(a, b);
  EXPECT_EQ(a.find("same"), std::string::npos);
  EXPECT_TRUE(verify_password("same", a));
  EXPECT_TRUE(verify_password("same", b));
  EXPECT_FALSE(verify_password("Same", a));
}
