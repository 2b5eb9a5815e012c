#pragma once

// RC5-32/r/b: 32-bit words, variable rounds, keys of 1..255 bytes.
// Words are loaded little-endian from each 8-byte block.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "geokey/bytes.hpp"

namespace geokey::cipher {

inline constexpr std::size_t kBlockSize = 8;
inline constexpr unsigned kWordBits = 32;
inline constexpr unsigned kDefaultRounds = 20;
inline constexpr std::size_t kMaxKeyLen = 255;
inline constexpr std::uint32_t kP32 = 0xB7E15163;
inline constexpr std::uint32_t kQ32 = 0x9E3779B9;

using Block = std::array<std::uint8_t, kBlockSize>;

struct Rc5Params {
  unsigned rounds = kDefaultRounds;
  std::size_t key_len = 16;
};

class RoundKeys {
 public:
  unsigned rounds() const { return rounds_; }
  std::span<const std::uint32_t> words() const { return words_; }

 private:
  friend RoundKeys key_schedule(ByteView key, const Rc5Params& params);
  RoundKeys(unsigned rounds, std::vector<std::uint32_t> words)
      : rounds_(rounds), words_(std::move(words)) {}

  unsigned rounds_;
  std::vector<std::uint32_t> words_;  // 2 * (rounds + 1)
};

RoundKeys key_schedule(ByteView key, const Rc5Params& params);
// Convenience: key_len taken from key.size().
RoundKeys key_schedule(ByteView key, unsigned rounds = kDefaultRounds);

Block encrypt_block(ByteView plaintext, const RoundKeys& rk);
Block decrypt_block(ByteView ciphertext, const RoundKeys& rk);

// Zero-IV CBC. Input must be a non-empty multiple of the block size.
Bytes cbc_encrypt_det(ByteView plaintext, const RoundKeys& rk);
void cbc_encrypt_det(ByteView plaintext, std::span<std::uint8_t> out,
                     const RoundKeys& rk);
Bytes cbc_decrypt_det(ByteView ciphertext, const RoundKeys& rk);

// Truncated CBC-MAC tag: the leading `bits` bits of the final block, read
// MSB-first, right-aligned in `value`.
struct MacTag {
  std::uint64_t value = 0;
  unsigned bits = 0;

  friend bool operator==(const MacTag&, const MacTag&) = default;
};

inline constexpr unsigned kMinMacBits = 16;
inline constexpr unsigned kMaxMacBits = 64;

// Pads with 0x80 then zeros to a block multiple and runs zero-IV CBC.
// Only sound for fixed-length messages.
MacTag cbc_mac(ByteView message, const RoundKeys& rk, unsigned bits);

}  // namespace geokey::cipher
