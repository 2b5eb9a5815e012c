#include <algorithm>

#include "geokey/authz.hpp"
#include "geokey/cipher.hpp"
#include "geokey/error.hpp"

namespace geokey::authz {

std::array<std::uint8_t, 6> ChallengePacket::serialize() const {
  const std::uint64_t bits = (std::uint64_t{static_cast<std::uint8_t>(MsgType::kChallenge)} << 46) |
                             (std::uint64_t{timestamp_ticks} << kNonceBits) | nonce;
  std::array<std::uint8_t, 6> out;
  for (int i = 0; i < 6; ++i) out[i] = static_cast<std::uint8_t>(bits >> (40 - 8 * i));
  return out;
}

ChallengePacket ChallengePacket::parse(ByteView data) {
  if (data.size() != 6) throw Error(ErrorCode::kFormat, "challenge packet must be 6 bytes");
  std::uint64_t bits = 0;
  for (std::uint8_t b : data) bits = (bits << 8) | b;
  if ((bits >> 46) != static_cast<std::uint8_t>(MsgType::kChallenge)) {
    throw Error(ErrorCode::kFormat, "not a challenge packet");
  }
  return {static_cast<std::uint32_t>((bits >> kNonceBits) & (kTimestampModulus - 1)),
          static_cast<std::uint32_t>(bits & (kNonceModulus - 1))};
}

std::array<std::uint8_t, 5> ResponsePacket::serialize() const {
  const std::uint64_t bits =
      ((std::uint64_t{static_cast<std::uint8_t>(MsgType::kResponse)} << 32) | mac) << 6;
  std::array<std::uint8_t, 5> out;
  for (int i = 0; i < 5; ++i) out[i] = static_cast<std::uint8_t>(bits >> (32 - 8 * i));
  return out;
}

ResponsePacket ResponsePacket::parse(ByteView data) {
  if (data.size() != 5) throw Error(ErrorCode::kFormat, "response packet must be 5 bytes");
  std::uint64_t bits = 0;
  for (std::uint8_t b : data) bits = (bits << 8) | b;
  if ((bits & 0x3f) != 0 || (bits >> 38) != static_cast<std::uint8_t>(MsgType::kResponse)) {
    throw Error(ErrorCode::kFormat, "not a response packet");
  }
  return {static_cast<std::uint32_t>(bits >> 6)};
}

ChallengePacket make_challenge(std::uint64_t clock_ticks, std::uint32_t nonce) {
  if (nonce >= kNonceModulus) throw Error(ErrorCode::kInvalidInput, "nonce exceeds 17 bits");
  return {static_cast<std::uint32_t>(clock_ticks % kTimestampModulus), nonce};
}

std::uint32_t response_mac(const ChallengePacket& challenge, const geo::Geocode& cell,
                           const kdf::KeyMaterial& key) {
  std::array<std::uint8_t, 12> msg;
  const auto ch = challenge.serialize();
  std::copy(ch.begin(), ch.end(), msg.begin());
  std::copy(cell.digits().begin(), cell.digits().end(), msg.begin() + 6);
  const auto rk = cipher::key_schedule(key, cipher::kDefaultRounds);
  return static_cast<std::uint32_t>(cipher::cbc_mac(msg, rk, kMacBits).value);
}

std::optional<ResponsePacket> respond(const ChallengePacket& challenge,
                                      const keystore::KeyStore& store,
                                      const geo::Geocode& own_cell, std::uint32_t now_day) {
  const auto key = store.lookup(own_cell, now_day);
  if (!key) return std::nullopt;
  return ResponsePacket{response_mac(challenge, own_cell, key->key)};
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kBadMac: return "bad-mac";
    case RejectReason::kStale: return "stale";
    case RejectReason::kReplayed: return "replayed";
    case RejectReason::kNoKey: return "no-key";
  }
  return "unknown";
}

std::uint32_t tick_distance(std::uint32_t a, std::uint32_t b) {
  const std::uint32_t d = (a - b) & (kTimestampModulus - 1);
  return std::min(d, kTimestampModulus - d);
}

bool ReplayCache::contains(const ChallengePacket& ch, const ResponsePacket& resp) const {
  return entries_.contains({ch.timestamp_ticks, ch.nonce, resp.mac});
}

void ReplayCache::insert(const ChallengePacket& ch, const ResponsePacket& resp) {
  entries_.insert({ch.timestamp_ticks, ch.nonce, resp.mac});
}

void ReplayCache::expire(std::uint64_t clock_ticks) {
  const auto now = static_cast<std::uint32_t>(clock_ticks % kTimestampModulus);
  std::erase_if(entries_, [now](const auto& e) {
    return tick_distance(now, std::get<0>(e)) > kFreshnessWindowTicks;
  });
}

Verdict verify(const ChallengePacket& challenge, const ResponsePacket& response,
               const keystore::KeyStore& store, const geo::Geocode& cell,
               std::uint64_t clock_ticks, std::uint32_t now_day, ReplayCache& cache) {
  const auto now = static_cast<std::uint32_t>(clock_ticks % kTimestampModulus);
  if (tick_distance(now, challenge.timestamp_ticks) > kFreshnessWindowTicks) {
    return {false, RejectReason::kStale, std::nullopt};
  }
  const auto key = store.lookup(cell, now_day);
  if (!key) return {false, RejectReason::kNoKey, std::nullopt};
  if (cache.contains(challenge, response)) {
    return {false, RejectReason::kReplayed, key->interval};
  }
  if (response_mac(challenge, cell, key->key) != response.mac) {
    return {false, RejectReason::kBadMac, key->interval};
  }
  cache.expire(clock_ticks);
  cache.insert(challenge, response);
  return {true, RejectReason::kBadMac, key->interval};
}

}  // namespace geokey::authz
