#include "hpcaas/error.hpp"

namespace hpcaas {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Unauthorized:
      return "unauthorized";
    case ErrorCode::InvalidCredentials:
      return "invalid_credentials";
    case ErrorCode::Forbidden:
      return "forbidden";
    case ErrorCode::NotFound:
      return "not_found";
    case ErrorCode::Validation:
      return "validation";
    case ErrorCode::Conflict:
      return "conflict";
    case ErrorCode::PayloadTooLarge:
      return "payload_too_large";
    case ErrorCode::InvalidCluster:
      return "invalid_cluster";
    case ErrorCode::Integrity:
      return "integrity";
    case ErrorCode::Io:
      return "io";
    case ErrorCode::Transport:
      return "transport";
    case ErrorCode::Usage:
      return "usage";
    case ErrorCode::Timeout:
      return "timeout";
  }
  return "unknown";
}

}  // namespace hpcaas
