#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hpcaas::rankmsg {

struct Endpoint {
  std::string host;  // numeric IPv4/IPv6
  std::uint16_t port = 0;

  bool operator==(const Endpoint&) const = default;
};

/// "127.0.0.1:4000" or "[::1]:4000". Throws Error(Usage) when malformed.
Endpoint parse_endpoint(const std::string& text);
std::string to_string(const Endpoint& endpoint);

/// Endpoint table text: one "<rank> <host:port>" line per rank, ranks
/// 0..n-1 each exactly once, '#' comments allowed. Returned in rank order.
std::vector<Endpoint> parse_endpoint_table(const std::string& text);
std::string format_endpoint_table(const std::vector<Endpoint>& endpoints);

std::vector<Endpoint> read_endpoint_file(const std::filesystem::path& path);

}  // namespace hpcaas::rankmsg
