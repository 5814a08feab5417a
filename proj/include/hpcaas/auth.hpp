#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "hpcaas/record_store.hpp"
#include "hpcaas/time.hpp"

namespace hpcaas {

using UserId = std::uint64_t;

enum class Role { Admin, Regular };

enum class Capability { ManageNodes, ManageUsers, UseFiles, ExecuteJobs };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);
std::string_view to_string(Capability capability);

/// Admin holds every capability; Regular only UseFiles and ExecuteJobs.
bool role_grants(Role role, Capability capability);

struct User {
  UserId id = 0;
  std::string username;
  std::string password_digest;
  Role role = Role::Regular;
  TimePoint created_at;
};

struct Session {
  std::string token;  // 32 lowercase hex chars, 128 bits of entropy
  UserId user_id = 0;
  TimePoint issued_at;
  TimePoint expires_at;
};

/// The identity a valid token resolves to.
struct Principal {
  UserId user_id = 0;
  Role role = Role::Regular;

  bool is_admin() const { return role == Role::Admin; }
};

// Argon2id work factors (libsodium's crypto_pwhash).
struct PasswordCost {
  unsigned long long opslimit;
  std::size_t memlimit;

  static PasswordCost interactive();
  static PasswordCost minimal();  // for tests
};

struct AuthConfig {
  std::chrono::seconds session_ttl = std::chrono::hours(24);
  PasswordCost password_cost = PasswordCost::interactive();
};

std::string hash_password(std::string_view password, const PasswordCost& cost);
bool verify_password(std::string_view password, const std::string& digest);

/// Fresh 128-bit session token rendered as 32 hex characters.
std::string generate_token();

/// Administrator-provisioned accounts and bearer sessions.
///
/// Users and sessions are persisted in the record store (kinds "user" and
/// "session"); sessions are stored by token digest, never by the token itself.
class AuthService {
 public:
  AuthService(RecordStore& store, AuthConfig config, Clock clock = system_clock());

  /// Creates the first Admin. Conflict once any user exists.
  User bootstrap_admin(const std::string& username, const std::string& password);

  User create_user(const std::string& token, const std::string& username,
                   const std::string& password, Role role);

  /// Unknown user and wrong password both raise the same InvalidCredentials.
  Session login(const std::string& username, const std::string& password);

  /// Unauthorized for a missing, unknown or expired token; Forbidden when the
  /// token is valid but the role lacks `capability`.
  Principal authorize(const std::string& token, Capability capability) const;

  std::optional<User> find_user(UserId id) const;
  std::vector<User> list_users() const;
  std::size_t user_count() const;

 private:
  struct StoredSession {
    RecordId record_id = 0;
    UserId user_id = 0;
    TimePoint issued_at;
    TimePoint expires_at;
  };

  std::string token_digest(const std::string& token) const;
  User insert_user(const std::string& username, const std::string& password, Role role);

  RecordStore& store_;
  AuthConfig config_;
  Clock clock_;
  std::string dummy_digest_;

  mutable std::shared_mutex mutex_;
  std::map<UserId, User> users_;
  std::map<std::string, UserId, std::less<>> by_name_;
  std::map<std::string, StoredSession, std::less<>> sessions_;  // keyed by token digest
};

}  // namespace hpcaas
