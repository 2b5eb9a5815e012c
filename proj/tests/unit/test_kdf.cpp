#include <random>
#include <unordered_set>

#include "geokey/cipher.hpp"
#include "geokey/kdf.hpp"
#include "support.hpp"

using namespace geokey;
using namespace geokey::kdf;
using geo::Geocode;

namespace {

secrets::MasterKey iota_master() {
  secrets::MasterKey mk;
  for (std::size_t i = 0; i < mk.key.size(); ++i) mk.key[i] = static_cast<std::uint8_t>(i);
  return mk;
}

}  // namespace

TEST_CASE("plaintext layout") {
  const auto pt = key_plaintext(Geocode::parse("6FG222"), {19000, 19060});
  CHECK(to_hex(pt) ==
        "01" "364647323232" "00004a38" "00004a74" "0000000000000000000000000000000000");
}

TEST_CASE("golden vectors") {
  const secrets::MasterKey zero{};
  CHECK(to_hex(derive_geokey(zero, Geocode::parse("222222"), {0, 60}).key) ==
        "00cccf4b5a7069cda300e4d957bc9e1a844a5bba3183918609cb023458d7bfb1");
  CHECK(to_hex(derive_geokey(iota_master(), Geocode::parse("6FG222"), {19000, 19060}).key) ==
        "b50435a84c563bca05cbbdf04938712e5148ff71f57b71c5cdf992bb763e0d22");
}

TEST_CASE("derivation is CBC encryption of the plaintext") {
  const auto mk = iota_master();
  const Geocode c = Geocode::parse("9FFGWQ");
  const TimeInterval t{100, 140};
  const auto pt = key_plaintext(c, t);
  const Bytes ct = cipher::cbc_encrypt_det(pt, cipher::key_schedule(mk.key));
  const auto k = derive_geokey(mk, c, t);
  CHECK(Bytes(k.key.begin(), k.key.end()) == ct);
  CHECK(k.geocode == c);
  CHECK(k.interval == t);
}

TEST_CASE("determinism and 100k-cell collision check") {
  std::mt19937_64 rng(17);
  secrets::MasterKey mk;
  for (auto& b : mk.key) b = static_cast<std::uint8_t>(rng());
  const Deriver d(mk);
  const Deriver d2(mk);
  std::unordered_set<std::string> seen;
  const std::uint32_t stride = geo::kCellCount / 100'000;
  for (std::uint32_t i = 0; i < 100'000; ++i) {
    const Geocode c = Geocode::from_ordinal(i * stride);
    const auto k = d.derive(c, {0, 60});
    if (i % 1000 == 0) CHECK(d2.derive(c, {0, 60}).key == k.key);
    seen.insert(std::string(k.key.begin(), k.key.end()));
  }
  CHECK(seen.size() == 100'000);
}

TEST_CASE("different intervals and master keys give different keys") {
  const auto mk = iota_master();
  const Geocode c = Geocode::parse("6FG222");
  CHECK(derive_geokey(mk, c, {0, 60}).key != derive_geokey(mk, c, {60, 120}).key);
  CHECK(derive_geokey(mk, c, {0, 60}).key != derive_geokey(mk, c, {0, 59}).key);
  CHECK(derive_geokey(mk, c, {0, 60}).key != derive_geokey(secrets::MasterKey{}, c, {0, 60}).key);
}

TEST_CASE("interval validation") {
  CHECK_ERROR(validate({10, 10}), ErrorCode::kInvalidInput);
  CHECK_ERROR(validate({10, 9}), ErrorCode::kInvalidInput);
  CHECK_ERROR(validate({0, 61}), ErrorCode::kInvalidInput);
  CHECK_NOTHROW(validate({0, 60}));
  CHECK_ERROR(derive_geokey(secrets::MasterKey{}, Geocode::parse("222222"), {0, 61}),
              ErrorCode::kInvalidInput);
}

TEST_CASE("tub key") {
  const auto mk = iota_master();
  const Geocode c = Geocode::parse("CG375Q");
  const GeoKey g = derive_geokey(mk, c, {0, 60});
  CHECK(tub_key(g) == g.key);

  const Deriver wide(mk, 512);
  const Bytes material = wide.derive_material(c, {0, 60});
  REQUIRE(material.size() == 64);
  const auto tub = tub_key(material);
  CHECK(std::equal(tub.begin(), tub.end(), material.begin()));
  CHECK(tub == g.key);
  CHECK(wide.derive(c, {0, 60}).key == g.key);

  CHECK_ERROR(tub_key(ByteView(material).first(31)), ErrorCode::kInvalidInput);
  CHECK_ERROR(Deriver(mk, 100), ErrorCode::kInvalidInput);
  CHECK_ERROR(Deriver(mk, 4096), ErrorCode::kInvalidInput);
}

TEST_CASE("epochs_for") {
  CHECK(epochs_for(0, 40) == std::vector<TimeInterval>{{0, 40}});
  CHECK(epochs_for(5, 65) == std::vector<TimeInterval>{{5, 65}});
  CHECK(epochs_for(0, 150) == std::vector<TimeInterval>{{0, 60}, {60, 120}, {120, 150}});
  CHECK(epochs_for(7, 127) == std::vector<TimeInterval>{{7, 67}, {67, 127}});
  CHECK_ERROR(epochs_for(3, 3), ErrorCode::kInvalidInput);
  CHECK_ERROR(epochs_for(4, 3), ErrorCode::kInvalidInput);
}
