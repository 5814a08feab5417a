#include "hpcaas/record_store.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "hpcaas/error.hpp"

namespace fs = std::filesystem;

namespace hpcaas {

namespace {

constexpr std::string_view kMagic = "RECv1";

bool valid_kind(std::string_view kind) {
  if (kind.empty() || kind.size() > 64) return false;
  return std::all_of(kind.begin(), kind.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

void check_kind(std::string_view kind) {
  if (!valid_kind(kind)) {
    fail(ErrorCode::Validation, "invalid record kind '" + std::string(kind) + "'");
  }
}

[[noreturn]] void io_fail(const std::string& what, const fs::path& path) {
  fail(ErrorCode::Io, what + " '" + path.string() + "': " + std::strerror(errno));
}

std::uint32_t checksum(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::string encode_record(std::string_view record) {
  char header[48];
  std::snprintf(header, sizeof header, "%s %zu %08x\n", kMagic.data(), record.size(),
                checksum(record));
  std::string file(header);
  file += record;
  return file;
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

std::optional<RecordId> parse_id(std::string_view text) {
  RecordId id = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
  if (ec != std::errc() || ptr != text.data() + text.size() || id == 0) return std::nullopt;
  return id;
}

}  // namespace

void write_file_atomically(const fs::path& path, std::string_view bytes, unsigned mode) {
  static std::atomic<unsigned> sequence{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(sequence++);

  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC,
                        static_cast<mode_t>(mode));
  if (fd < 0) io_fail("cannot create", tmp);
  std::size_t written = 0;
  while (written < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + written, bytes.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int saved = errno;
      ::close(fd);
      ::unlink(tmp.c_str());
      errno = saved;
      io_fail("cannot write", tmp);
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const int saved = errno;
    ::close(fd);
    ::unlink(tmp.c_str());
    errno = saved;
    io_fail("cannot sync", tmp);
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    const int saved = errno;
    ::unlink(tmp.c_str());
    errno = saved;
    io_fail("cannot rename into", path);
  }
  fsync_dir(path.parent_path());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot open", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

RecordStore::RecordStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec || !fs::is_directory(root_)) {
    fail(ErrorCode::Io, "cannot create data directory '" + root_.string() + "': " + ec.message());
  }
  // Leftover temp files from an interrupted write are never valid records.
  for (const auto& kind : fs::directory_iterator(root_)) {
    if (!kind.is_directory()) continue;
    for (const auto& entry : fs::directory_iterator(kind.path())) {
      if (entry.path().filename().string().find(".tmp.") != std::string::npos) {
        fs::remove(entry.path(), ec);
      }
    }
  }
}

fs::path RecordStore::kind_dir(std::string_view kind) const { return root_ / std::string(kind); }

fs::path RecordStore::record_path(std::string_view kind, RecordId id) const {
  return kind_dir(kind) / (std::to_string(id) + ".rec");
}

RecordId RecordStore::load_counter(std::string_view kind) {
  if (auto it = counters_.find(kind); it != counters_.end()) return it->second;

  const fs::path dir = kind_dir(kind);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());

  RecordId last = 0;
  const fs::path counter = dir / ".counter";
  if (fs::exists(counter)) {
    std::string text = read_file(counter);
    while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
    if (auto id = parse_id(text)) last = *id;
  }
  // The counter is written before the record, but a hand-edited or lost
  // counter must still never let an id be reissued.
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".rec") continue;
    if (auto id = parse_id(entry.path().stem().string())) last = std::max(last, *id);
  }
  counters_.emplace(std::string(kind), last);
  return last;
}

RecordId RecordStore::put_record(std::string_view kind, std::string_view record) {
  check_kind(kind);
  std::unique_lock lock(mutex_);
  const RecordId id = load_counter(kind) + 1;
  write_file_atomically(kind_dir(kind) / ".counter", std::to_string(id) + "\n");
  counters_[std::string(kind)] = id;

  const std::string file = encode_record(record);
  write_file_atomically(record_path(kind, id), file);
  return id;
}

void RecordStore::update_record(std::string_view kind, RecordId id, std::string_view record) {
  check_kind(kind);
  std::unique_lock lock(mutex_);
  const fs::path path = record_path(kind, id);
  if (!fs::exists(path)) {
    fail(ErrorCode::NotFound, "no record " + std::string(kind) + "/" + std::to_string(id));
  }
  const std::string file = encode_record(record);
  write_file_atomically(path, file);
}

std::string RecordStore::read_verified(std::string_view kind, RecordId id,
                                       const fs::path& path) const {
  const std::string file = read_file(path);
  auto corrupt = [&](const char* why) {
    fail(ErrorCode::Integrity, "corrupt record " + std::string(kind) + "/" + std::to_string(id) +
                                   ": " + why);
  };
  const auto newline = file.find('\n');
  if (newline == std::string::npos) corrupt("missing header");
  std::istringstream header(file.substr(0, newline));
  std::string magic, crc_text;
  std::size_t length = 0;
  if (!(header >> magic >> length >> crc_text) || magic != kMagic) corrupt("bad header");
  std::string payload = file.substr(newline + 1);
  if (payload.size() != length) corrupt("length mismatch");
  char crc[9];
  std::snprintf(crc, sizeof crc, "%08x", checksum(payload));
  if (crc_text != crc) corrupt("checksum mismatch");
  return payload;
}

std::optional<std::string> RecordStore::get_record(std::string_view kind, RecordId id) const {
  check_kind(kind);
  std::shared_lock lock(mutex_);
  const fs::path path = record_path(kind, id);
  if (!fs::exists(path)) return std::nullopt;
  return read_verified(kind, id, path);
}

bool RecordStore::delete_record(std::string_view kind, RecordId id) {
  check_kind(kind);
  std::unique_lock lock(mutex_);
  const fs::path path = record_path(kind, id);
  std::error_code ec;
  const bool existed = fs::remove(path, ec);
  if (ec) fail(ErrorCode::Io, "cannot delete '" + path.string() + "': " + ec.message());
  if (existed) fsync_dir(path.parent_path());
  return existed;
}

std::vector<std::pair<RecordId, std::string>> RecordStore::list_records(
    std::string_view kind) const {
  check_kind(kind);
  std::shared_lock lock(mutex_);
  std::vector<std::pair<RecordId, std::string>> out;
  const fs::path dir = kind_dir(kind);
  if (!fs::is_directory(dir)) return out;

  std::vector<RecordId> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".rec") continue;
    if (auto id = parse_id(entry.path().stem().string())) ids.push_back(*id);
  }
  std::sort(ids.begin(), ids.end());
  out.reserve(ids.size());
  for (RecordId id : ids) out.emplace_back(id, read_verified(kind, id, record_path(kind, id)));
  return out;
}

}  // namespace hpcaas
