#include "geokey/keystore.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <ostream>
#include <string>

#include "geokey/error.hpp"
#include "geokey/secrets.hpp"

namespace geokey::keystore {

namespace {

constexpr std::string_view kMagic = "GEOK";

void put_header(Bytes& out, const LicenseeId& licensee, std::uint64_t count) {
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(kBundleVersion);
  out.insert(out.end(), licensee.begin(), licensee.end());
  put_u64_be(out, count);
}

void put_record(Bytes& out, const KeyRecord& r) {
  const auto& d = r.geocode.digits();
  out.insert(out.end(), d.begin(), d.end());
  put_u32_be(out, r.interval.start_day);
  put_u32_be(out, r.interval.end_day);
  out.insert(out.end(), r.key.begin(), r.key.end());
}

KeyRecord get_record(const std::uint8_t* p) {
  const std::string_view text(reinterpret_cast<const char*>(p), 6);
  KeyRecord r{geo::Geocode::parse(text), {get_u32_be(p + 6), get_u32_be(p + 10)}, {}};
  if (r.interval.start_day >= r.interval.end_day) {
    throw Error(ErrorCode::kFormat, "bundle record with empty interval");
  }
  std::copy_n(p + 14, kdf::kGeoKeyLen, r.key.begin());
  return r;
}

// Size of the bundle starting at data[0], from its header; throws if the
// header is malformed or the buffer is too short.
std::size_t framed_size(ByteView data) {
  if (data.size() < kHeaderSize + kChecksumSize) {
    throw Error(ErrorCode::kFormat, "bundle shorter than header");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), data.begin())) {
    throw Error(ErrorCode::kFormat, "bundle: bad magic");
  }
  if (data[4] != kBundleVersion) {
    throw Error(ErrorCode::kFormat, "bundle: unsupported version");
  }
  const std::uint64_t count = get_u64_be(data.data() + 21);
  if (count > (data.size() - kHeaderSize - kChecksumSize) / kRecordSize) {
    throw Error(ErrorCode::kFormat, "bundle: record count exceeds data");
  }
  return static_cast<std::size_t>(size_report(count));
}

}  // namespace

Bytes serialize_bundle(const Bundle& bundle) {
  Bytes out;
  out.reserve(size_report(bundle.records.size()));
  put_header(out, bundle.licensee_id, bundle.records.size());
  for (const KeyRecord& r : bundle.records) put_record(out, r);
  put_u32_be(out, crc32(out));
  return out;
}

Bundle parse_bundle(ByteView data) {
  const std::size_t size = framed_size(data);
  if (size != data.size()) {
    throw Error(ErrorCode::kFormat, "bundle: length does not match record count");
  }
  if (crc32(data.first(size - kChecksumSize)) != get_u32_be(data.data() + size - kChecksumSize)) {
    throw Error(ErrorCode::kIntegrity, "bundle: checksum mismatch");
  }
  Bundle b;
  std::copy_n(data.begin() + 5, 16, b.licensee_id.begin());
  const std::uint64_t count = get_u64_be(data.data() + 21);
  b.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    b.records.push_back(get_record(data.data() + kHeaderSize + i * kRecordSize));
  }
  return b;
}

BundleWriter::BundleWriter(std::ostream& out, const LicenseeId& licensee,
                           std::uint64_t count)
    : out_(out), expected_(count), crc_(static_cast<std::uint32_t>(::crc32(0L, Z_NULL, 0))) {
  Bytes header;
  put_header(header, licensee, count);
  emit(header);
}

void BundleWriter::emit(ByteView data) {
  crc_ = static_cast<std::uint32_t>(
      ::crc32(crc_, data.data(), static_cast<uInt>(data.size())));
  out_.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size()));
  bytes_ += data.size();
}

void BundleWriter::add(const KeyRecord& record) {
  if (finished_ || added_ == expected_) {
    throw Error(ErrorCode::kInvalidInput, "bundle writer: more records than announced");
  }
  Bytes buf;
  buf.reserve(kRecordSize);
  put_record(buf, record);
  emit(buf);
  ++added_;
}

void BundleWriter::finish() {
  if (finished_) return;
  if (added_ != expected_) {
    throw Error(ErrorCode::kInvalidInput, "bundle writer: fewer records than announced");
  }
  Bytes trailer;
  put_u32_be(trailer, crc_);
  out_.write(reinterpret_cast<const char*>(trailer.data()), 4);
  bytes_ += 4;
  finished_ = true;
  if (!out_) throw Error(ErrorCode::kIo, "bundle writer: stream error");
}

// ---- KeyStore ----

std::unique_ptr<KeyStore> KeyStore::open(const std::filesystem::path& file) {
  auto store = std::make_unique<KeyStore>();
  if (std::filesystem::exists(file)) {
    const Bytes data = secrets::read_file(file);
    std::size_t off = 0;
    while (off < data.size()) {
      const ByteView rest = ByteView(data).subspan(off);
      const std::size_t n = framed_size(rest);
      store->merge(parse_bundle(rest.first(n)));
      off += n;
    }
  } else {
    secrets::write_file(file, {});
  }
  store->file_ = file;
  return store;
}

void KeyStore::merge(const Bundle& bundle) {
  for (const KeyRecord& r : bundle.records) {
    auto& entries = index_[r.geocode];
    auto it = std::find_if(entries.begin(), entries.end(),
                           [&](const Entry& e) { return e.interval == r.interval; });
    if (it != entries.end()) {
      it->key = r.key;
    } else {
      entries.push_back({r.interval, r.key});
      std::sort(entries.begin(), entries.end(),
                [](const Entry& a, const Entry& b) { return a.interval < b.interval; });
      ++count_;
    }
  }
}

std::size_t KeyStore::import_bundle(ByteView data) {
  const Bundle bundle = parse_bundle(data);  // all validation before mutation
  std::unique_lock lock(mutex_);
  if (file_) {
    std::ofstream out(*file_, std::ios::binary | std::ios::app);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::kIo, "cannot append to " + file_->string());
  }
  merge(bundle);
  return bundle.records.size();
}

std::optional<kdf::GeoKey> KeyStore::lookup(const geo::Geocode& code,
                                            std::uint32_t day) const {
  std::shared_lock lock(mutex_);
  const auto it = index_.find(code);
  if (it == index_.end()) return std::nullopt;
  // Latest-starting interval wins where intervals overlap.
  for (auto e = it->second.rbegin(); e != it->second.rend(); ++e) {
    if (e->interval.contains(day)) return kdf::GeoKey{e->key, code, e->interval};
  }
  return std::nullopt;
}

std::size_t KeyStore::prune_expired(std::uint32_t now_day) {
  std::unique_lock lock(mutex_);
  std::size_t removed = 0;
  for (auto it = index_.begin(); it != index_.end();) {
    auto& entries = it->second;
    const auto before = entries.size();
    std::erase_if(entries, [&](const Entry& e) { return e.interval.end_day <= now_day; });
    removed += before - entries.size();
    it = entries.empty() ? index_.erase(it) : std::next(it);
  }
  count_ -= removed;
  if (removed > 0 && file_) rewrite_file_locked();
  return removed;
}

std::vector<KeyRecord> KeyStore::records() const {
  std::shared_lock lock(mutex_);
  std::vector<KeyRecord> out;
  out.reserve(count_);
  for (const auto& [code, entries] : index_) {
    for (const Entry& e : entries) out.push_back({code, e.interval, e.key});
  }
  std::sort(out.begin(), out.end(), [](const KeyRecord& a, const KeyRecord& b) {
    if (a.geocode != b.geocode) return a.geocode < b.geocode;
    return a.interval < b.interval;
  });
  return out;
}

Bytes KeyStore::export_bundle(const LicenseeId& licensee) const {
  return serialize_bundle({licensee, records()});
}

std::size_t KeyStore::size() const {
  std::shared_lock lock(mutex_);
  return count_;
}

void KeyStore::rewrite_file_locked() const {
  std::vector<KeyRecord> recs;
  recs.reserve(count_);
  for (const auto& [code, entries] : index_) {
    for (const Entry& e : entries) recs.push_back({code, e.interval, e.key});
  }
  const Bytes data = serialize_bundle({{}, std::move(recs)});
  const auto tmp = std::filesystem::path(file_->string() + ".tmp");
  secrets::write_file(tmp, data);
  std::filesystem::rename(tmp, *file_);
}

}  // namespace geokey::keystore
