#include "hpcaas/file_module.hpp"

#include <sodium.h>

#include <algorithm>

#include "hpcaas/error.hpp"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace hpcaas {

namespace {

constexpr std::string_view kFileKind = "file";
constexpr std::string_view kSequenceKind = "file_seq";
constexpr std::size_t kMaxExtension = 16;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  char hex[2 * sizeof digest + 1];
  sodium_bin2hex(hex, sizeof hex, digest, sizeof digest);
  return hex;
}

json file_to_json(const ProgramFile& f) {
  return {{"pointer", f.pointer},
          {"owner_user_id", f.owner_user_id},
          {"file_no", f.file_no},
          {"original_name", f.original_name},
          {"stored_name", f.stored_name},
          {"byte_size", f.byte_size},
          {"content_sha256", f.content_sha256},
          {"uploaded_at", format_utc(f.uploaded_at)}};
}

ProgramFile file_from_json(const json& j) {
  ProgramFile f;
  f.pointer = j.at("pointer");
  f.owner_user_id = j.at("owner_user_id");
  f.file_no = j.at("file_no");
  f.original_name = j.at("original_name");
  f.stored_name = j.at("stored_name");
  f.byte_size = j.at("byte_size");
  f.content_sha256 = j.at("content_sha256");
  f.uploaded_at = parse_utc(j.at("uploaded_at"));
  return f;
}

}  // namespace

FilePointer encode_pointer(UserId owner, std::uint32_t file_no) {
  if (owner == 0) fail(ErrorCode::Validation, "file pointer owner must be >= 1");
  if (file_no == 0 || file_no >= kPointerRadix) {
    fail(ErrorCode::Validation, "file number " + std::to_string(file_no) + " out of range");
  }
  if (owner > (UINT64_MAX - file_no) / kPointerRadix) {
    fail(ErrorCode::Validation, "user id too large for file pointer encoding");
  }
  return owner * kPointerRadix + file_no;
}

PointerParts decode_pointer(FilePointer pointer) {
  return {pointer / kPointerRadix, static_cast<std::uint32_t>(pointer % kPointerRadix)};
}

std::string sanitize_file_name(std::string_view name) {
  if (const auto slash = name.find_last_of("/\\"); slash != std::string_view::npos) {
    name.remove_prefix(slash + 1);
  }
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '.' || c == '_' || c == '-';
    out += safe ? c : '_';
  }
  if (std::all_of(out.begin(), out.end(), [](char c) { return c == '.'; })) out.clear();
  return out;
}

std::string file_extension(std::string_view sanitized_name) {
  const auto dot = sanitized_name.find_last_of('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == sanitized_name.size()) return "";
  std::string ext(sanitized_name.substr(dot));
  if (ext.size() > kMaxExtension) return "";
  return ext;
}

FileModule::FileModule(RecordStore& store, const AuthService& auth, fs::path files_dir,
                       FileModuleConfig config, Clock clock)
    : store_(store),
      auth_(auth),
      files_dir_(std::move(files_dir)),
      config_(config),
      clock_(std::move(clock)) {
  std::error_code ec;
  fs::create_directories(files_dir_, ec);
  if (ec) {
    fail(ErrorCode::Io, "cannot create files directory '" + files_dir_.string() + "': " +
                            ec.message());
  }
  for (auto& [id, bytes] : store_.list_records(kFileKind)) {
    ProgramFile f = file_from_json(json::parse(bytes));
    files_.emplace(f.pointer, Entry{id, std::move(f)});
  }
  for (auto& [id, bytes] : store_.list_records(kSequenceKind)) {
    const json j = json::parse(bytes);
    sequences_[j.at("user_id").get<UserId>()] = Sequence{id, j.at("last_file_no")};
  }
}

std::mutex& FileModule::user_lock(UserId user) {
  std::unique_lock lock(mutex_);
  auto& slot = user_locks_[user];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::uint32_t FileModule::next_file_no(UserId user) {
  std::unique_lock lock(mutex_);
  Sequence& seq = sequences_[user];
  if (seq.last_file_no + 1 >= kPointerRadix) {
    fail(ErrorCode::Conflict, "user " + std::to_string(user) + " has exhausted file numbers");
  }
  const std::uint32_t file_no = seq.last_file_no + 1;
  const std::string record = json{{"user_id", user}, {"last_file_no", file_no}}.dump();
  if (seq.record_id == 0) {
    seq.record_id = store_.put_record(kSequenceKind, record);
  } else {
    store_.update_record(kSequenceKind, seq.record_id, record);
  }
  seq.last_file_no = file_no;
  return file_no;
}

ProgramFile FileModule::upload_file(const std::string& token, const std::string& original_name,
                                    std::string_view content) {
  const Principal who = auth_.authorize(token, Capability::UseFiles);
  if (content.size() > config_.max_upload_bytes) {
    fail(ErrorCode::PayloadTooLarge, "upload of " + std::to_string(content.size()) +
                                         " bytes exceeds the " +
                                         std::to_string(config_.max_upload_bytes) + " byte limit");
  }
  const std::string clean = sanitize_file_name(original_name);
  if (clean.empty()) fail(ErrorCode::Validation, "file name is empty after sanitization");

  std::lock_guard per_user(user_lock(who.user_id));
  ProgramFile f;
  f.owner_user_id = who.user_id;
  f.file_no = next_file_no(who.user_id);
  f.pointer = encode_pointer(f.owner_user_id, f.file_no);
  f.original_name = clean;
  f.stored_name = std::to_string(f.pointer) + file_extension(clean);
  f.byte_size = content.size();
  f.content_sha256 = sha256_hex(content);
  f.uploaded_at = clock_();

  write_file_atomically(files_dir_ / f.stored_name, content);
  const RecordId id = store_.put_record(kFileKind, file_to_json(f).dump());

  std::unique_lock lock(mutex_);
  files_.emplace(f.pointer, Entry{id, f});
  return f;
}

std::vector<ProgramFile> FileModule::list_files(const std::string& token) const {
  const Principal who = auth_.authorize(token, Capability::UseFiles);
  std::shared_lock lock(mutex_);
  std::vector<ProgramFile> out;
  for (const auto& [pointer, entry] : files_) {
    if (who.is_admin() || entry.file.owner_user_id == who.user_id) out.push_back(entry.file);
  }
  return out;
}

bool FileModule::delete_file(const std::string& token, FilePointer pointer) {
  const Principal who = auth_.authorize(token, Capability::UseFiles);
  std::unique_lock lock(mutex_);
  const auto it = files_.find(pointer);
  if (it == files_.end()) fail(ErrorCode::NotFound, "no file " + std::to_string(pointer));
  if (!who.is_admin() && it->second.file.owner_user_id != who.user_id) {
    fail(ErrorCode::Forbidden, "file " + std::to_string(pointer) + " belongs to another user");
  }
  const Entry entry = it->second;
  store_.delete_record(kFileKind, entry.record_id);
  files_.erase(it);
  std::error_code ec;
  fs::remove(files_dir_ / entry.file.stored_name, ec);
  return true;
}

std::pair<fs::path, ProgramFile> FileModule::resolve(FilePointer pointer) const {
  std::shared_lock lock(mutex_);
  const auto it = files_.find(pointer);
  if (it == files_.end()) fail(ErrorCode::NotFound, "no file " + std::to_string(pointer));
  fs::path path = files_dir_ / it->second.file.stored_name;
  if (!fs::is_regular_file(path)) {
    fail(ErrorCode::Integrity, "file " + std::to_string(pointer) + " is catalogued but " +
                                   path.string() + " is missing");
  }
  return {std::move(path), it->second.file};
}

std::optional<ProgramFile> FileModule::find(FilePointer pointer) const {
  std::shared_lock lock(mutex_);
  if (auto it = files_.find(pointer); it != files_.end()) return it->second.file;
  return std::nullopt;
}

}  // namespace hpcaas
