#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hpcaas {

// Closed set of failure categories shared by every gateway module. The HTTP
// layer maps each one to a status code and a machine-readable string.
enum class ErrorCode {
  Unauthorized,
  InvalidCredentials,
  Forbidden,
  NotFound,
  Validation,
  Conflict,
  PayloadTooLarge,
  InvalidCluster,
  Integrity,
  Io,
  Transport,
  Usage,
  Timeout,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace hpcaas
