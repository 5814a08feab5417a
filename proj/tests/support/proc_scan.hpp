#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace hpcaas::testing {

// Number of live processes whose command line mentions `needle`.
inline int processes_mentioning(const std::string& needle) {
  int count = 0;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator("/proc", ec)) {
    const std::string name = entry.path().filename().string();
    if (name.empty() || name.find_first_not_of("0123456789") != std::string::npos) continue;
    std::ifstream in(entry.path() / "cmdline", std::ios::binary);
    const std::string cmdline((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (cmdline.find(needle) != std::string::npos) ++count;
  }
  return count;
}

}  // namespace hpcaas::testing
