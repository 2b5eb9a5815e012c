#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "geokey/bench.hpp"
#include "geokey/kdf.hpp"
#include "geokey/keystore.hpp"
#include "support.hpp"

using namespace geokey;
using namespace geokey::keystore;
using geo::Geocode;

namespace {

KeyRecord rec(const char* code, std::uint32_t a, std::uint32_t b, std::uint8_t fill) {
  KeyRecord r{Geocode::parse(code), {a, b}, {}};
  r.key.fill(fill);
  return r;
}

Bundle sample_bundle() {
  Bundle b;
  b.licensee_id.fill(0xAB);
  b.records = {rec("6FG222", 0, 60, 1), rec("6FG223", 0, 60, 2), rec("6FG222", 60, 120, 3)};
  return b;
}

}  // namespace

TEST_CASE("size_report") {
  CHECK(size_report(0) == 33);
  CHECK(size_report(9) == 447);
  CHECK(size_report(25'920'000) == 1'192'320'033ULL);
  CHECK(size_report(25'920'000) < 7'000'000'000ULL);
  static_assert(size_report(1) == 79);
}

TEST_CASE("bundle layout") {
  const Bundle b = sample_bundle();
  const Bytes data = serialize_bundle(b);
  REQUIRE(data.size() == size_report(3));
  CHECK(std::string(data.begin(), data.begin() + 4) == "GEOK");
  CHECK(data[4] == 1);
  CHECK(data[5] == 0xAB);
  CHECK(get_u64_be(data.data() + 21) == 3);
  // First record: geocode ASCII, start BE, end BE, key.
  CHECK(std::string(data.begin() + 29, data.begin() + 35) == "6FG222");
  CHECK(get_u32_be(data.data() + 35) == 0);
  CHECK(get_u32_be(data.data() + 39) == 60);
  CHECK(data[43] == 1);
  CHECK(get_u32_be(data.data() + data.size() - 4) ==
        crc32(ByteView(data).first(data.size() - 4)));

  const Bundle back = parse_bundle(data);
  CHECK(back.licensee_id == b.licensee_id);
  CHECK(back.records == b.records);
}

TEST_CASE("parse_bundle rejects damage") {
  const Bytes data = serialize_bundle(sample_bundle());
  Bytes bad = data;
  bad.back() ^= 1;
  CHECK_ERROR(parse_bundle(bad), ErrorCode::kIntegrity);
  bad = data;
  bad[50] ^= 1;
  CHECK_ERROR(parse_bundle(bad), ErrorCode::kIntegrity);
  bad = data;
  bad[0] = 'X';
  CHECK_ERROR(parse_bundle(bad), ErrorCode::kFormat);
  bad = data;
  bad[4] = 2;
  CHECK_ERROR(parse_bundle(bad), ErrorCode::kFormat);
  CHECK_ERROR(parse_bundle(ByteView(data).first(40)), ErrorCode::kFormat);
  bad = data;
  bad.push_back(0);
  CHECK_ERROR(parse_bundle(bad), ErrorCode::kFormat);
}

TEST_CASE("BundleWriter matches serialize_bundle") {
  const Bundle b = sample_bundle();
  std::ostringstream out;
  BundleWriter w(out, b.licensee_id, b.records.size());
  for (const auto& r : b.records) w.add(r);
  w.finish();
  const std::string s = out.str();
  CHECK(Bytes(s.begin(), s.end()) == serialize_bundle(b));
  CHECK(w.bytes_written() == s.size());

  std::ostringstream short_out;
  BundleWriter w2(short_out, {}, 2);
  w2.add(b.records[0]);
  CHECK_ERROR(w2.finish(), ErrorCode::kInvalidInput);
  BundleWriter w3(short_out, {}, 0);
  CHECK_ERROR(w3.add(b.records[0]), ErrorCode::kInvalidInput);
}

TEST_CASE("derive_keyspace streams a valid bundle") {
  secrets::MasterKey mk{};
  const kdf::Deriver d(mk);
  std::ostringstream out;
  const auto r = bench::derive_keyspace(d, {0, 60}, out, 500);
  CHECK(r.records == 500);
  CHECK(r.bytes == size_report(500));
  const std::string s = out.str();
  const Bundle b = parse_bundle(Bytes(s.begin(), s.end()));
  REQUIRE(b.records.size() == 500);
  CHECK(b.records[0].geocode.str() == "222222");
  CHECK(to_hex(b.records[0].key) ==
        "00cccf4b5a7069cda300e4d957bc9e1a844a5bba3183918609cb023458d7bfb1");

  bench::CountingBuf buf;
  std::ostream sink(&buf);
  const auto counted = bench::derive_keyspace(d, {0, 60}, sink, 1000);
  CHECK(buf.count() == size_report(1000));
  CHECK(counted.bytes == size_report(1000));
}

TEST_CASE("import and lookup") {
  KeyStore s;
  CHECK(s.import_bundle(serialize_bundle(Bundle{})) == 0);
  CHECK(s.size() == 0);

  s.import_bundle(serialize_bundle(sample_bundle()));
  CHECK(s.size() == 3);
  auto hit = s.lookup(Geocode::parse("6FG222"), 59);
  REQUIRE(hit);
  CHECK(hit->key[0] == 1);
  CHECK(hit->interval == kdf::TimeInterval{0, 60});
  hit = s.lookup(Geocode::parse("6FG222"), 60);
  REQUIRE(hit);
  CHECK(hit->key[0] == 3);
  CHECK(!s.lookup(Geocode::parse("6FG223"), 60));
  CHECK(!s.lookup(Geocode::parse("6FG224"), 0));
  CHECK(!s.lookup(Geocode::parse("6FG222"), 120));

  // Idempotent re-import.
  const Bytes before = s.export_bundle();
  s.import_bundle(serialize_bundle(sample_bundle()));
  CHECK(s.export_bundle() == before);

  // Newer import overwrites the same (geocode, interval).
  Bundle upd;
  upd.records = {rec("6FG223", 0, 60, 9)};
  s.import_bundle(serialize_bundle(upd));
  CHECK(s.size() == 3);
  CHECK(s.lookup(Geocode::parse("6FG223"), 1)->key[0] == 9);
}

TEST_CASE("overlapping intervals prefer the latest start") {
  KeyStore s;
  Bundle b;
  b.records = {rec("6FG222", 0, 60, 1), rec("6FG222", 30, 90, 2)};
  s.import_bundle(serialize_bundle(b));
  CHECK(s.lookup(Geocode::parse("6FG222"), 29)->key[0] == 1);
  CHECK(s.lookup(Geocode::parse("6FG222"), 30)->key[0] == 2);
  CHECK(s.lookup(Geocode::parse("6FG222"), 89)->key[0] == 2);
}

TEST_CASE("damaged import leaves the store unchanged") {
  KeyStore s;
  s.import_bundle(serialize_bundle(sample_bundle()));
  const Bytes before = s.export_bundle();
  Bundle other;
  other.records = {rec("9FFGWQ", 0, 60, 7)};
  Bytes bad = serialize_bundle(other);
  bad[bad.size() - 1] ^= 0xFF;
  CHECK_ERROR(s.import_bundle(bad), ErrorCode::kIntegrity);
  CHECK(s.export_bundle() == before);
  CHECK(!s.lookup(Geocode::parse("9FFGWQ"), 0));
}

TEST_CASE("prune_expired") {
  KeyStore s;
  CHECK(s.prune_expired(100) == 0);
  Bundle b;
  b.records = {rec("6FG222", 0, 10, 1), rec("6FG223", 0, 11, 2), rec("6FG224", 5, 20, 3)};
  s.import_bundle(serialize_bundle(b));
  CHECK(s.prune_expired(11) == 2);  // ended yesterday, and ends today
  CHECK(s.size() == 1);
  CHECK(!s.lookup(Geocode::parse("6FG223"), 10));
  CHECK(s.lookup(Geocode::parse("6FG224"), 11));
}

TEST_CASE("export/import round trip is byte-identical and order independent") {
  std::mt19937_64 rng(31);
  std::vector<Bundle> bundles(4);
  for (auto& b : bundles) {
    for (int i = 0; i < 50; ++i) {
      KeyRecord r{Geocode::from_ordinal(static_cast<std::uint32_t>(rng() % 1000)), {0, 60}, {}};
      r.interval.start_day = static_cast<std::uint32_t>(rng() % 3) * 60;
      r.interval.end_day = r.interval.start_day + 60;
      // Key depends only on (cell, interval) so order cannot matter.
      r.key.fill(static_cast<std::uint8_t>(r.geocode.ordinal() + r.interval.start_day));
      b.records.push_back(r);
    }
  }
  KeyStore a, c;
  for (const auto& b : bundles) a.import_bundle(serialize_bundle(b));
  for (auto it = bundles.rbegin(); it != bundles.rend(); ++it) c.import_bundle(serialize_bundle(*it));
  CHECK(a.export_bundle() == c.export_bundle());

  KeyStore d;
  d.import_bundle(a.export_bundle());
  CHECK(d.export_bundle() == a.export_bundle());
  const auto recs = a.records();
  CHECK(std::is_sorted(recs.begin(), recs.end(), [](const KeyRecord& x, const KeyRecord& y) {
    return std::tie(x.geocode, x.interval) < std::tie(y.geocode, y.interval);
  }));
}

TEST_CASE("file-backed store persists imports and prunes") {
  testing::TempDir dir;
  const auto path = dir / "dev.store";
  {
    auto s = KeyStore::open(path);
    s->import_bundle(serialize_bundle(sample_bundle()));
    Bundle extra;
    extra.records = {rec("6FG224", 0, 5, 4)};
    s->import_bundle(serialize_bundle(extra));
  }
  {
    auto s = KeyStore::open(path);
    CHECK(s->size() == 4);
    CHECK(s->lookup(Geocode::parse("6FG224"), 4)->key[0] == 4);
    CHECK(s->prune_expired(5) == 1);
  }
  auto s = KeyStore::open(path);
  CHECK(s->size() == 3);
  CHECK(!s->lookup(Geocode::parse("6FG224"), 4));

  {
    std::ofstream(dir / "junk.store", std::ios::binary) << "not a bundle at all, just junk bytes here";
    CHECK_ERROR(KeyStore::open(dir / "junk.store"), ErrorCode::kFormat);
  }
}

TEST_CASE("lookups during imports see whole bundles") {
  KeyStore s;
  Bundle b1, b2;
  for (std::uint32_t i = 0; i < 2000; ++i) {
    KeyRecord r{Geocode::from_ordinal(i), {0, 60}, {}};
    r.key.fill(1);
    b1.records.push_back(r);
    r.key.fill(2);
    b2.records.push_back(r);
  }
  const Bytes d1 = serialize_bundle(b1), d2 = serialize_bundle(b2);
  s.import_bundle(d1);
  std::atomic<bool> stop{false};
  std::atomic<int> torn{0};
  std::thread reader([&] {
    while (!stop) {
      const auto recs = s.records();
      for (const auto& r : recs) {
        if (r.key[0] != recs.front().key[0] || recs.size() != 2000) {
          ++torn;
          break;
        }
      }
    }
  });
  for (int i = 0; i < 50; ++i) s.import_bundle(i % 2 ? d1 : d2);
  stop = true;
  reader.join();
  CHECK(torn == 0);
  const auto recs = s.records();
  CHECK(recs.size() == 2000);
  for (const auto& r : recs) CHECK(r.key[0] == recs.front().key[0]);
}
