#pragma once

// Geosecured temporary keys: the 32-byte plaintext
//   0x01 | geocode (6 ASCII) | start_day (u32 BE) | end_day (u32 BE) | 17 x 0x00
// encrypted with zero-IV CBC under RC5-32/20 keyed by the 255-byte master key.

#include <array>
#include <compare>
#include <cstdint>
#include <vector>

#include "geokey/bytes.hpp"
#include "geokey/cipher.hpp"
#include "geokey/geocell.hpp"
#include "geokey/secrets.hpp"

namespace geokey::kdf {

inline constexpr std::uint32_t kEpochDays = 60;
inline constexpr std::size_t kGeoKeyLen = 32;
inline constexpr std::size_t kPlaintextLen = 32;
inline constexpr std::uint8_t kPlaintextVersion = 0x01;
inline constexpr unsigned kDefaultDerivedBits = 256;
inline constexpr unsigned kMaxDerivedBits = 2048;

// Days since 1970-01-01 UTC; end exclusive.
struct TimeInterval {
  std::uint32_t start_day = 0;
  std::uint32_t end_day = 0;

  std::uint32_t days() const { return end_day - start_day; }
  bool contains(std::uint32_t day) const { return start_day <= day && day < end_day; }

  friend auto operator<=>(const TimeInterval&, const TimeInterval&) = default;
};

// start < end and at most one 60-day epoch long.
void validate(TimeInterval t);

using KeyMaterial = std::array<std::uint8_t, kGeoKeyLen>;

struct GeoKey {
  KeyMaterial key{};
  geo::Geocode geocode;
  TimeInterval interval;
};

std::array<std::uint8_t, kPlaintextLen> key_plaintext(const geo::Geocode& code,
                                                      TimeInterval t);

// Schedules the master key once; derive() is const and safe to share
// between threads.
class Deriver {
 public:
  explicit Deriver(const secrets::MasterKey& mk,
                   unsigned derived_bits = kDefaultDerivedBits);

  GeoKey derive(const geo::Geocode& code, TimeInterval t) const;
  // derived_bits / 8 bytes. The leading 32 bytes equal derive().key for any
  // configured length of at least 256 bits.
  Bytes derive_material(const geo::Geocode& code, TimeInterval t) const;

  unsigned derived_bits() const { return derived_bits_; }

 private:
  cipher::RoundKeys round_keys_;
  unsigned derived_bits_;
};

GeoKey derive_geokey(const secrets::MasterKey& mk, const geo::Geocode& code,
                     TimeInterval t);

// 256-bit key for the Venilia TUB cipher: the leading 256 bits of the
// derived material.
KeyMaterial tub_key(const GeoKey& key);
KeyMaterial tub_key(ByteView material);

// Consecutive span-aligned epochs of kEpochDays; the last may be shorter.
std::vector<TimeInterval> epochs_for(std::uint32_t span_start_day,
                                     std::uint32_t span_end_day);

}  // namespace geokey::kdf
