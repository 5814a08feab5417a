#include "hpcaas/auth.hpp"

#include <sodium.h>

#include <algorithm>

#include "hpcaas/error.hpp"
#include "json.hpp"

using nlohmann::json;

namespace hpcaas {

namespace {

constexpr std::string_view kUserKind = "user";
constexpr std::string_view kSessionKind = "session";

void ensure_sodium() {
  if (sodium_init() < 0) fail(ErrorCode::Io, "libsodium initialisation failed");
}

std::string to_hex(const unsigned char* bytes, std::size_t len) {
  std::string hex(len * 2 + 1, '\0');
  sodium_bin2hex(hex.data(), hex.size(), bytes, len);
  hex.pop_back();
  return hex;
}

void validate_username(const std::string& username) {
  if (username.empty()) fail(ErrorCode::Validation, "username must not be empty");
  if (username.size() > 64) fail(ErrorCode::Validation, "username longer than 64 characters");
  const bool printable = std::all_of(username.begin(), username.end(), [](char c) {
    return static_cast<unsigned char>(c) > 0x20 && c != 0x7f;
  });
  if (!printable) {
    fail(ErrorCode::Validation, "username may not contain whitespace or control characters");
  }
}

void validate_password(const std::string& password) {
  if (password.empty()) fail(ErrorCode::Validation, "password must not be empty");
}

json user_to_json(const User& u) {
  return {{"username", u.username},
          {"password_digest", u.password_digest},
          {"role", to_string(u.role)},
          {"created_at", format_utc(u.created_at)}};
}

}  // namespace

std::string_view to_string(Role role) { return role == Role::Admin ? "admin" : "regular"; }

Role parse_role(std::string_view text) {
  if (text == "admin") return Role::Admin;
  if (text == "regular") return Role::Regular;
  fail(ErrorCode::Validation, "unknown role '" + std::string(text) + "'");
}

std::string_view to_string(Capability capability) {
  switch (capability) {
    case Capability::ManageNodes:
      return "manage_nodes";
    case Capability::ManageUsers:
      return "manage_users";
    case Capability::UseFiles:
      return "use_files";
    case Capability::ExecuteJobs:
      return "execute_jobs";
  }
  return "unknown";
}

bool role_grants(Role role, Capability capability) {
  if (role == Role::Admin) return true;
  return capability == Capability::UseFiles || capability == Capability::ExecuteJobs;
}

PasswordCost PasswordCost::interactive() {
  return {crypto_pwhash_OPSLIMIT_INTERACTIVE, crypto_pwhash_MEMLIMIT_INTERACTIVE};
}

PasswordCost PasswordCost::minimal() {
  return {crypto_pwhash_OPSLIMIT_MIN, crypto_pwhash_MEMLIMIT_MIN};
}

std::string hash_password(std::string_view password, const PasswordCost& cost) {
  ensure_sodium();
  char out[crypto_pwhash_STRBYTES];
  if (crypto_pwhash_str(out, password.data(), password.size(), cost.opslimit, cost.memlimit) !=
      0) {
    fail(ErrorCode::Io, "password hashing ran out of memory");
  }
  return out;
}

bool verify_password(std::string_view password, const std::string& digest) {
  ensure_sodium();
  return crypto_pwhash_str_verify(digest.c_str(), password.data(), password.size()) == 0;
}

std::string generate_token() {
  ensure_sodium();
  unsigned char raw[16];
  randombytes_buf(raw, sizeof raw);
  return to_hex(raw, sizeof raw);
}

AuthService::AuthService(RecordStore& store, AuthConfig config, Clock clock)
    : store_(store), config_(config), clock_(std::move(clock)) {
  ensure_sodium();
  // Verified against on unknown usernames so both failure paths cost the same.
  dummy_digest_ = hash_password(generate_token(), config_.password_cost);

  for (auto& [id, bytes] : store_.list_records(kUserKind)) {
    const json j = json::parse(bytes);
    User u{id, j.at("username"), j.at("password_digest"), parse_role(j.at("role").get<std::string>()),
           parse_utc(j.at("created_at"))};
    by_name_.emplace(u.username, id);
    users_.emplace(id, std::move(u));
  }
  const TimePoint now = clock_();
  for (auto& [id, bytes] : store_.list_records(kSessionKind)) {
    const json j = json::parse(bytes);
    StoredSession s{id, j.at("user_id"), parse_utc(j.at("issued_at")),
                    parse_utc(j.at("expires_at"))};
    if (s.expires_at <= now) {
      store_.delete_record(kSessionKind, id);
      continue;
    }
    sessions_.emplace(j.at("token_digest").get<std::string>(), s);
  }
}

std::string AuthService::token_digest(const std::string& token) const {
  unsigned char digest[crypto_generichash_BYTES];
  crypto_generichash(digest, sizeof digest, reinterpret_cast<const unsigned char*>(token.data()),
                     token.size(), nullptr, 0);
  return to_hex(digest, sizeof digest);
}

User AuthService::insert_user(const std::string& username, const std::string& password,
                              Role role) {
  User u;
  u.username = username;
  u.password_digest = hash_password(password, config_.password_cost);
  u.role = role;
  u.created_at = clock_();
  u.id = store_.put_record(kUserKind, user_to_json(u).dump());
  by_name_.emplace(u.username, u.id);
  users_.emplace(u.id, u);
  return u;
}

User AuthService::bootstrap_admin(const std::string& username, const std::string& password) {
  validate_username(username);
  validate_password(password);
  std::unique_lock lock(mutex_);
  if (!users_.empty()) fail(ErrorCode::Conflict, "an administrator has already been bootstrapped");
  return insert_user(username, password, Role::Admin);
}

User AuthService::create_user(const std::string& token, const std::string& username,
                              const std::string& password, Role role) {
  authorize(token, Capability::ManageUsers);
  validate_username(username);
  validate_password(password);
  std::unique_lock lock(mutex_);
  if (by_name_.contains(username)) {
    fail(ErrorCode::Conflict, "username '" + username + "' is taken");
  }
  return insert_user(username, password, role);
}

Session AuthService::login(const std::string& username, const std::string& password) {
  std::optional<User> user;
  {
    std::shared_lock lock(mutex_);
    if (auto it = by_name_.find(username); it != by_name_.end()) user = users_.at(it->second);
  }
  const bool ok = user ? verify_password(password, user->password_digest)
                       : (verify_password(password, dummy_digest_), false);
  if (!ok) fail(ErrorCode::InvalidCredentials, "invalid credentials");

  Session s;
  s.token = generate_token();
  s.user_id = user->id;
  s.issued_at = clock_();
  s.expires_at = s.issued_at + config_.session_ttl;
  const std::string digest = token_digest(s.token);
  const json record = {{"token_digest", digest},
                       {"user_id", s.user_id},
                       {"issued_at", format_utc(s.issued_at)},
                       {"expires_at", format_utc(s.expires_at)}};

  std::unique_lock lock(mutex_);
  const RecordId id = store_.put_record(kSessionKind, record.dump());
  sessions_.emplace(digest, StoredSession{id, s.user_id, s.issued_at, s.expires_at});
  return s;
}

Principal AuthService::authorize(const std::string& token, Capability capability) const {
  if (token.empty()) fail(ErrorCode::Unauthorized, "missing bearer token");
  const std::string digest = token_digest(token);
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(digest);
  if (it == sessions_.end()) fail(ErrorCode::Unauthorized, "unknown session");
  if (clock_() >= it->second.expires_at) fail(ErrorCode::Unauthorized, "session expired");
  const auto user = users_.find(it->second.user_id);
  if (user == users_.end()) fail(ErrorCode::Unauthorized, "session user no longer exists");
  if (!role_grants(user->second.role, capability)) {
    fail(ErrorCode::Forbidden,
         "role '" + std::string(to_string(user->second.role)) + "' lacks capability " +
             std::string(to_string(capability)));
  }
  return {user->first, user->second.role};
}

std::optional<User> AuthService::find_user(UserId id) const {
  std::shared_lock lock(mutex_);
  if (auto it = users_.find(id); it != users_.end()) return it->second;
  return std::nullopt;
}

std::vector<User> AuthService::list_users() const {
  std::shared_lock lock(mutex_);
  std::vector<User> out;
  for (const auto& [id, u] : users_) out.push_back(u);
  return out;
}

std::size_t AuthService::user_count() const {
  std::shared_lock lock(mutex_);
  return users_.size();
}

}  // namespace hpcaas
