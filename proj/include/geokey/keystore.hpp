#pragma once

// Device-side key storage and the bundle file format.
//
// Bundle (all integers big-endian):
//   "GEOK" | version (1) | licensee_id[16] | record_count u64 | records | crc32
// KeyRecord (46 bytes):
//   geocode[6] ASCII | start_day u32 | end_day u32 | key[32]

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "geokey/bytes.hpp"
#include "geokey/geocell.hpp"
#include "geokey/kdf.hpp"

namespace geokey::keystore {

inline constexpr std::size_t kRecordSize = 46;
inline constexpr std::size_t kHeaderSize = 29;
inline constexpr std::size_t kChecksumSize = 4;
inline constexpr std::uint8_t kBundleVersion = 1;

using LicenseeId = std::array<std::uint8_t, 16>;

struct KeyRecord {
  geo::Geocode geocode;
  kdf::TimeInterval interval;
  kdf::KeyMaterial key{};

  friend bool operator==(const KeyRecord&, const KeyRecord&) = default;
};

struct Bundle {
  LicenseeId licensee_id{};
  std::vector<KeyRecord> records;
};

// Exact serialized size of a bundle with n records: 33 + 46 n.
constexpr std::uint64_t size_report(std::uint64_t n_records) {
  return kHeaderSize + kChecksumSize + kRecordSize * n_records;
}

Bytes serialize_bundle(const Bundle& bundle);
// Validates magic, version, length and checksum; throws Error(kFormat) or
// Error(kIntegrity) and returns nothing partial.
Bundle parse_bundle(ByteView data);

// Streams a bundle of a known record count without holding it in memory.
class BundleWriter {
 public:
  BundleWriter(std::ostream& out, const LicenseeId& licensee, std::uint64_t count);
  void add(const KeyRecord& record);
  // Writes the checksum; throws if fewer/more records were added than
  // announced.
  void finish();
  std::uint64_t bytes_written() const { return bytes_; }

 private:
  void emit(ByteView data);

  std::ostream& out_;
  std::uint64_t expected_;
  std::uint64_t added_ = 0;
  std::uint64_t bytes_ = 0;
  std::uint32_t crc_ = 0;
  bool finished_ = false;
};

// Thread-safe: any number of concurrent lookups; imports and prunes are
// exclusive and become visible all at once.
class KeyStore {
 public:
  KeyStore() = default;

  // Opens (or creates) an append-only store file holding a sequence of
  // bundles, replaying it into memory. Later imports are appended.
  static std::unique_ptr<KeyStore> open(const std::filesystem::path& file);

  // Returns the number of records in the bundle. Same (geocode, interval)
  // pairs are overwritten by the newer import.
  std::size_t import_bundle(ByteView data);
  std::optional<kdf::GeoKey> lookup(const geo::Geocode& code, std::uint32_t day) const;
  // Removes records with end_day <= now_day. Compacts the backing file.
  std::size_t prune_expired(std::uint32_t now_day);

  // Records sorted by (geocode, start_day, end_day).
  std::vector<KeyRecord> records() const;
  Bytes export_bundle(const LicenseeId& licensee = {}) const;
  std::size_t size() const;

 private:
  struct Entry {
    kdf::TimeInterval interval;
    kdf::KeyMaterial key;
  };
  using Index = std::unordered_map<geo::Geocode, std::vector<Entry>>;

  void merge(const Bundle& bundle);
  void rewrite_file_locked() const;

  mutable std::shared_mutex mutex_;
  Index index_;
  std::size_t count_ = 0;
  std::optional<std::filesystem::path> file_;
};

}  // namespace geokey::keystore
