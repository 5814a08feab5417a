#include "hpcaas/rankmsg/endpoints.hpp"

#include <arpa/inet.h>

#include <charconv>
#include <map>
#include <sstream>

#include "hpcaas/error.hpp"
#include "hpcaas/record_store.hpp"

namespace hpcaas::rankmsg {

namespace {

template <typename T>
bool parse_number(std::string_view text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
  auto bad = [&]() -> Endpoint { fail(ErrorCode::Usage, "malformed endpoint '" + text + "'"); };
  std::string host;
  std::string_view port_text;
  if (!text.empty() && text.front() == '[') {
    const auto close = text.find(']');
    if (close == std::string::npos || close + 1 >= text.size() || text[close + 1] != ':') {
      return bad();
    }
    host = text.substr(1, close - 1);
    port_text = std::string_view(text).substr(close + 2);
  } else {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) return bad();
    host = text.substr(0, colon);
    port_text = std::string_view(text).substr(colon + 1);
  }
  unsigned char buf[sizeof(in6_addr)];
  if (inet_pton(AF_INET, host.c_str(), buf) != 1 && inet_pton(AF_INET6, host.c_str(), buf) != 1) {
    return bad();
  }
  std::uint16_t port = 0;
  if (!parse_number(port_text, port) || port == 0) return bad();
  return {host, port};
}

std::string to_string(const Endpoint& endpoint) {
  if (endpoint.host.find(':') != std::string::npos) {
    return "[" + endpoint.host + "]:" + std::to_string(endpoint.port);
  }
  return endpoint.host + ":" + std::to_string(endpoint.port);
}

std::vector<Endpoint> parse_endpoint_table(const std::string& text) {
  std::map<std::uint32_t, Endpoint> by_rank;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string rank_text, endpoint_text, extra;
    std::uint32_t rank = 0;
    if (!(fields >> rank_text >> endpoint_text) || (fields >> extra) ||
        !parse_number(std::string_view(rank_text), rank)) {
      fail(ErrorCode::Usage, "endpoint table line " + std::to_string(line_no) + " is malformed");
    }
    if (!by_rank.emplace(rank, parse_endpoint(endpoint_text)).second) {
      fail(ErrorCode::Usage, "rank " + std::to_string(rank) + " listed twice in endpoint table");
    }
  }
  std::vector<Endpoint> out;
  out.reserve(by_rank.size());
  for (auto& [rank, ep] : by_rank) {
    if (rank != out.size()) {
      fail(ErrorCode::Usage, "endpoint table is missing rank " + std::to_string(out.size()));
    }
    out.push_back(std::move(ep));
  }
  if (out.empty()) fail(ErrorCode::Usage, "endpoint table is empty");
  return out;
}

std::string format_endpoint_table(const std::vector<Endpoint>& endpoints) {
  std::string out;
  for (std::size_t r = 0; r < endpoints.size(); ++r) {
    out += std::to_string(r) + " " + to_string(endpoints[r]) + "\n";
  }
  return out;
}

std::vector<Endpoint> read_endpoint_file(const std::filesystem::path& path) {
  return parse_endpoint_table(read_file(path));
}

}  // namespace hpcaas::rankmsg
