#include "geokey/kdf.hpp"

#include <algorithm>
#include <string>

#include "geokey/error.hpp"

namespace geokey::kdf {

void validate(TimeInterval t) {
  if (t.start_day >= t.end_day) {
    throw Error(ErrorCode::kInvalidInput,
                "interval start must precede end: [" + std::to_string(t.start_day) +
                    ", " + std::to_string(t.end_day) + ")");
  }
  if (t.days() > kEpochDays) {
    throw Error(ErrorCode::kInvalidInput,
                "interval exceeds the 60-day rekey epoch: " + std::to_string(t.days()) +
                    " days");
  }
}

std::array<std::uint8_t, kPlaintextLen> key_plaintext(const geo::Geocode& code,
                                                      TimeInterval t) {
  std::array<std::uint8_t, kPlaintextLen> pt{};
  pt[0] = kPlaintextVersion;
  std::copy(code.digits().begin(), code.digits().end(), pt.begin() + 1);
  for (int i = 0; i < 4; ++i) {
    pt[7 + i] = static_cast<std::uint8_t>(t.start_day >> (24 - 8 * i));
    pt[11 + i] = static_cast<std::uint8_t>(t.end_day >> (24 - 8 * i));
  }
  return pt;
}

Deriver::Deriver(const secrets::MasterKey& mk, unsigned derived_bits)
    : round_keys_(cipher::key_schedule(mk.key, cipher::kDefaultRounds)),
      derived_bits_(derived_bits) {
  if (derived_bits == 0 || derived_bits % 64 != 0 || derived_bits > kMaxDerivedBits) {
    throw Error(ErrorCode::kInvalidInput,
                "derived key length must be a positive multiple of 64 bits up to 2048");
  }
}

GeoKey Deriver::derive(const geo::Geocode& code, TimeInterval t) const {
  validate(t);
  const auto pt = key_plaintext(code, t);
  GeoKey out{{}, code, t};
  cipher::cbc_encrypt_det(pt, out.key, round_keys_);
  return out;
}

Bytes Deriver::derive_material(const geo::Geocode& code, TimeInterval t) const {
  validate(t);
  const std::size_t len = derived_bits_ / 8;
  const auto pt = key_plaintext(code, t);
  // Zero-extending the plaintext keeps the 32-byte CBC prefix unchanged.
  Bytes padded(std::max(len, kPlaintextLen), 0);
  std::copy(pt.begin(), pt.end(), padded.begin());
  Bytes ct = cipher::cbc_encrypt_det(padded, round_keys_);
  ct.resize(len);
  return ct;
}

GeoKey derive_geokey(const secrets::MasterKey& mk, const geo::Geocode& code,
                     TimeInterval t) {
  return Deriver(mk).derive(code, t);
}

KeyMaterial tub_key(const GeoKey& key) { return tub_key(ByteView(key.key)); }

KeyMaterial tub_key(ByteView material) {
  if (material.size() < kGeoKeyLen) {
    throw Error(ErrorCode::kInvalidInput, "key material shorter than 256 bits");
  }
  KeyMaterial out;
  std::copy_n(material.begin(), kGeoKeyLen, out.begin());
  return out;
}

std::vector<TimeInterval> epochs_for(std::uint32_t span_start_day,
                                     std::uint32_t span_end_day) {
  if (span_start_day >= span_end_day) {
    throw Error(ErrorCode::kInvalidInput, "empty licence span");
  }
  std::vector<TimeInterval> out;
  for (std::uint64_t s = span_start_day; s < span_end_day; s += kEpochDays) {
    const auto e = std::min<std::uint64_t>(s + kEpochDays, span_end_day);
    out.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(e)});
  }
  return out;
}

}  // namespace geokey::kdf
