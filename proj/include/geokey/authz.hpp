#pragma once

// Challenge-response authorization between assets in the same cell.
//
// Challenge (48 bits, 6 bytes MSB-first):
//   type 01 (2) | timestamp (29, 10 ms ticks mod 2^29) | nonce (17)
// Response (34 bits, 5 bytes MSB-first, low 6 bits zero):
//   type 10 (2) | mac (32)
// The MAC is a 32-bit truncated CBC-MAC under the cell's GeoKey over
// challenge bytes || geocode ASCII.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string_view>
#include <tuple>

#include "geokey/bytes.hpp"
#include "geokey/geocell.hpp"
#include "geokey/kdf.hpp"
#include "geokey/keystore.hpp"

namespace geokey::authz {

inline constexpr unsigned kTimestampBits = 29;
inline constexpr unsigned kNonceBits = 17;
inline constexpr unsigned kMacBits = 32;
inline constexpr unsigned kPacketBudgetBits = 64;
inline constexpr std::uint32_t kTimestampModulus = 1u << kTimestampBits;
inline constexpr std::uint32_t kNonceModulus = 1u << kNonceBits;
inline constexpr double kTickSeconds = 0.01;
inline constexpr std::uint64_t kTicksPerDay = 8'640'000;
inline constexpr std::uint32_t kFreshnessWindowTicks = 1000;
inline constexpr double kSoundSpeedMps = 1500.0;

static_assert(2 + kTimestampBits + kNonceBits <= kPacketBudgetBits);
static_assert(2 + kMacBits <= kPacketBudgetBits);
// The timestamp must not wrap inside one 60-day key epoch.
static_assert(std::uint64_t{kTimestampModulus} >= kdf::kEpochDays * kTicksPerDay);

enum class MsgType : std::uint8_t { kChallenge = 0b01, kResponse = 0b10 };

struct ChallengePacket {
  std::uint32_t timestamp_ticks = 0;  // < 2^29
  std::uint32_t nonce = 0;            // < 2^17

  std::array<std::uint8_t, 6> serialize() const;
  static ChallengePacket parse(ByteView data);
  friend auto operator<=>(const ChallengePacket&, const ChallengePacket&) = default;
};

struct ResponsePacket {
  std::uint32_t mac = 0;

  std::array<std::uint8_t, 5> serialize() const;
  static ResponsePacket parse(ByteView data);
  friend bool operator==(const ResponsePacket&, const ResponsePacket&) = default;
};

ChallengePacket make_challenge(std::uint64_t clock_ticks, std::uint32_t nonce);

template <typename Urbg>
ChallengePacket make_challenge(std::uint64_t clock_ticks, Urbg& rng) {
  std::uniform_int_distribution<std::uint32_t> nonce(0, kNonceModulus - 1);
  return make_challenge(clock_ticks, nonce(rng));
}

std::uint32_t response_mac(const ChallengePacket& challenge, const geo::Geocode& cell,
                           const kdf::KeyMaterial& key);

// Silence (nullopt) when the store has no key for own_cell on now_day.
std::optional<ResponsePacket> respond(const ChallengePacket& challenge,
                                      const keystore::KeyStore& store,
                                      const geo::Geocode& own_cell, std::uint32_t now_day);

enum class RejectReason { kBadMac, kStale, kReplayed, kNoKey };
std::string_view to_string(RejectReason r);

struct Verdict {
  bool accepted = false;
  RejectReason reason = RejectReason::kBadMac;  // meaningful when !accepted
  // Interval of the key the check ran under, when there was one.
  std::optional<kdf::TimeInterval> key_interval;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

// Modular distance between two 29-bit timestamps.
std::uint32_t tick_distance(std::uint32_t a, std::uint32_t b);

// Accepted (timestamp, nonce, mac) tuples, kept until they fall outside the
// freshness window.
class ReplayCache {
 public:
  bool contains(const ChallengePacket& ch, const ResponsePacket& resp) const;
  void insert(const ChallengePacket& ch, const ResponsePacket& resp);
  void expire(std::uint64_t clock_ticks);
  std::size_t size() const { return entries_.size(); }

 private:
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> entries_;
};

// Checks, in order: freshness, key availability for `cell`, replay, MAC.
// `cell` is the cell the verifier attributes to the responder.
Verdict verify(const ChallengePacket& challenge, const ResponsePacket& response,
               const keystore::KeyStore& store, const geo::Geocode& cell,
               std::uint64_t clock_ticks, std::uint32_t now_day, ReplayCache& cache);

}  // namespace geokey::authz
