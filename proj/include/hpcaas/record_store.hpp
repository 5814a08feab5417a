#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hpcaas {

using RecordId = std::uint64_t;

/// Embedded on-disk record store shared by the gateway modules.
///
/// Layout: `<root>/<kind>/<id>.rec` holds one record, `<root>/<kind>/.counter`
/// holds the last id allocated for that kind. Each record file carries a short
/// text header (`RECv1 <length> <crc32>`) followed by the payload, so a torn or
/// edited file is detected on read. Writes go through a temp file and rename,
/// so a record is either fully present or absent after a crash.
///
/// Thread-safe: mutations are serialized, readers run concurrently.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path root);

  RecordStore(const RecordStore&) = delete;
  RecordStore& operator=(const RecordStore&) = delete;

  /// Persists `record` under a fresh id for `kind`. Ids start at 1 and are
  /// never reused, even after deletes or reopening the store.
  RecordId put_record(std::string_view kind, std::string_view record);

  /// Replaces an existing record. Throws NotFound if absent.
  void update_record(std::string_view kind, RecordId id, std::string_view record);

  /// Throws Integrity if the stored file fails its header or checksum.
  std::optional<std::string> get_record(std::string_view kind, RecordId id) const;

  bool delete_record(std::string_view kind, RecordId id);

  /// All live records of `kind`, ascending by id.
  std::vector<std::pair<RecordId, std::string>> list_records(std::string_view kind) const;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path kind_dir(std::string_view kind) const;
  std::filesystem::path record_path(std::string_view kind, RecordId id) const;
  RecordId load_counter(std::string_view kind);
  std::string read_verified(std::string_view kind, RecordId id,
                            const std::filesystem::path& path) const;

  std::filesystem::path root_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, RecordId, std::less<>> counters_;
};

/// Writes `bytes` to `path` via a sibling temp file, fsync and rename.
void write_file_atomically(const std::filesystem::path& path, std::string_view bytes,
                           unsigned mode = 0640);

std::string read_file(const std::filesystem::path& path);

}  // namespace hpcaas
