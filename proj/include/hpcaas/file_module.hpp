#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hpcaas/auth.hpp"
#include "hpcaas/record_store.hpp"

namespace hpcaas {

using FilePointer = std::uint64_t;

// A pointer packs owner and per-user file number into one decimal-readable
// integer: owner_user_id * 10^6 + file_no, with 1 <= file_no < 10^6.
inline constexpr std::uint64_t kPointerRadix = 1'000'000;

struct PointerParts {
  UserId owner = 0;
  std::uint32_t file_no = 0;

  bool operator==(const PointerParts&) const = default;
};

FilePointer encode_pointer(UserId owner, std::uint32_t file_no);
PointerParts decode_pointer(FilePointer pointer);

/// Basename of `name` restricted to [A-Za-z0-9._-]; anything else becomes '_'.
std::string sanitize_file_name(std::string_view name);

/// Final dot-suffix including the dot (".py"), or "" when there is none.
/// Leading-dot names (".bashrc") have no extension.
std::string file_extension(std::string_view sanitized_name);

struct ProgramFile {
  FilePointer pointer = 0;
  UserId owner_user_id = 0;
  std::uint32_t file_no = 0;
  std::string original_name;
  std::string stored_name;
  std::uint64_t byte_size = 0;
  std::string content_sha256;
  TimePoint uploaded_at;
};

struct FileModuleConfig {
  std::uint64_t max_upload_bytes = 16ull << 20;
};

/// Upload catalog. Bytes live flat in `files_dir` under `<pointer><ext>`;
/// catalog entries are record kind "file" and per-user counters "file_seq".
class FileModule {
 public:
  FileModule(RecordStore& store, const AuthService& auth, std::filesystem::path files_dir,
             FileModuleConfig config = {}, Clock clock = system_clock());

  ProgramFile upload_file(const std::string& token, const std::string& original_name,
                          std::string_view content);

  /// Regular users see their own files, admins see everything; ascending pointer.
  std::vector<ProgramFile> list_files(const std::string& token) const;

  bool delete_file(const std::string& token, FilePointer pointer);

  /// Path on disk plus catalog entry. NotFound for unknown pointers,
  /// Integrity when the catalog entry has lost its bytes.
  std::pair<std::filesystem::path, ProgramFile> resolve(FilePointer pointer) const;

  std::optional<ProgramFile> find(FilePointer pointer) const;

  const std::filesystem::path& files_dir() const noexcept { return files_dir_; }

 private:
  struct Entry {
    RecordId record_id = 0;
    ProgramFile file;
  };
  struct Sequence {
    RecordId record_id = 0;
    std::uint32_t last_file_no = 0;
  };

  std::mutex& user_lock(UserId user);
  std::uint32_t next_file_no(UserId user);

  RecordStore& store_;
  const AuthService& auth_;
  std::filesystem::path files_dir_;
  FileModuleConfig config_;
  Clock clock_;

  mutable std::shared_mutex mutex_;
  std::map<FilePointer, Entry> files_;
  std::map<UserId, Sequence> sequences_;
  std::map<UserId, std::unique_ptr<std::mutex>> user_locks_;
};

}  // namespace hpcaas
