#pragma once

// Master-key ceremony and (k, n) threshold custody.
//
// Eleven participants each contribute 23 bytes; the concatenation in
// participant order plus a two-byte version tag forms the 255-byte RC5
// master key. Custody uses byte-wise Shamir sharing over GF(2^8) with the
// AES reduction polynomial 0x11B.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "geokey/bytes.hpp"

namespace geokey::secrets {

inline constexpr std::size_t kMasterKeyLen = 255;
inline constexpr std::size_t kContributionLen = 23;
inline constexpr unsigned kParticipants = 11;
inline constexpr unsigned kThreshold = 6;
inline constexpr std::uint8_t kKeyVersionTag = 0x01;
inline constexpr std::uint8_t kFileVersion = 1;

using CeremonyId = std::array<std::uint8_t, 16>;
using KeyBytes = std::array<std::uint8_t, kMasterKeyLen>;

struct Contribution {
  unsigned participant_id = 0;  // 1..11
  std::array<std::uint8_t, kContributionLen> material{};
  std::uint32_t declared_entropy_bits = 0;
};

struct MasterKey {
  KeyBytes key{};
  CeremonyId ceremony_id{};
  std::uint64_t total_entropy_bits = 0;
};

struct Share {
  std::uint8_t x = 0;
  KeyBytes y{};
  CeremonyId ceremony_id{};

  friend bool operator==(const Share&, const Share&) = default;
};

// Fresh random material; declared entropy is recorded as given.
Contribution make_contribution(unsigned participant_id,
                               std::uint32_t declared_entropy_bits);

// Requires exactly one contribution per participant 1..11 (any order).
MasterKey assemble_master_key(std::span<const Contribution> contributions,
                              const CeremonyId& ceremony_id = {});

// Per-byte Shamir with `coefficients` supplying (k - 1) random bytes per
// secret byte, secret-byte-major. Exposed for deterministic tests.
std::vector<Share> split_with_coefficients(const MasterKey& mk, unsigned k,
                                           unsigned n, ByteView coefficients);

template <typename Urbg>
std::vector<Share> split(const MasterKey& mk, unsigned k, unsigned n, Urbg& rng) {
  Bytes coeffs(kMasterKeyLen * (k > 0 ? k - 1 : 0));
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& c : coeffs) c = static_cast<std::uint8_t>(byte(rng));
  return split_with_coefficients(mk, k, n, coeffs);
}

// Uses the system CSPRNG.
std::vector<Share> split(const MasterKey& mk, unsigned k = kThreshold,
                         unsigned n = kParticipants);

// Lagrange interpolation at zero over the first k shares; any further shares
// must lie on the same polynomials or Error(kIntegrity) is thrown.
// total_entropy_bits is not recoverable from shares and is left 0.
MasterKey combine(std::span<const Share> shares, unsigned k = kThreshold);

// GF(2^8) arithmetic, polynomial x^8 + x^4 + x^3 + x + 1.
namespace gf256 {
std::uint8_t mul(std::uint8_t a, std::uint8_t b);
std::uint8_t inv(std::uint8_t a);  // a != 0
// Value at x of the unique polynomial of degree < xs.size() through
// (xs[i], ys[i]). xs must be distinct.
std::uint8_t interpolate(std::span<const std::uint8_t> xs,
                         std::span<const std::uint8_t> ys, std::uint8_t x);
}  // namespace gf256

// ---- files ----
// Share:        "GKSH" | version | ceremony_id[16] | x | y[255] | crc32 (BE)
// Contribution: "GKCT" | version | participant | entropy u32 BE | material[23] | crc32
// Master key:   "GKMK" | version | ceremony_id[16] | entropy u64 BE | key[255] | crc32
inline constexpr std::size_t kShareFileSize = 4 + 1 + 16 + 1 + kMasterKeyLen + 4;

Bytes serialize_share(const Share& share);
Share parse_share(ByteView data);
Bytes serialize_contribution(const Contribution& c);
Contribution parse_contribution(ByteView data);
Bytes serialize_master_key(const MasterKey& mk);
MasterKey parse_master_key(ByteView data);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteView data);

}  // namespace geokey::secrets
