#include "geokey/cipher.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "geokey/error.hpp"

namespace geokey::cipher {

namespace {

std::uint32_t load_le(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

void store_le(std::uint32_t v, std::uint8_t* p) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

void encrypt_raw(const std::uint8_t* in, std::uint8_t* out, const std::uint32_t* s,
                 unsigned rounds) {
  std::uint32_t a = load_le(in) + s[0];
  std::uint32_t b = load_le(in + 4) + s[1];
  for (unsigned i = 1; i <= rounds; ++i) {
    a = std::rotl(a ^ b, static_cast<int>(b & 31)) + s[2 * i];
    b = std::rotl(b ^ a, static_cast<int>(a & 31)) + s[2 * i + 1];
  }
  store_le(a, out);
  store_le(b, out + 4);
}

void decrypt_raw(const std::uint8_t* in, std::uint8_t* out, const std::uint32_t* s,
                 unsigned rounds) {
  std::uint32_t a = load_le(in);
  std::uint32_t b = load_le(in + 4);
  for (unsigned i = rounds; i >= 1; --i) {
    b = std::rotr(b - s[2 * i + 1], static_cast<int>(a & 31)) ^ a;
    a = std::rotr(a - s[2 * i], static_cast<int>(b & 31)) ^ b;
  }
  store_le(a - s[0], out);
  store_le(b - s[1], out + 4);
}

void require_blocks(ByteView data, const char* what) {
  if (data.empty() || data.size() % kBlockSize != 0) {
    throw Error(ErrorCode::kInvalidInput,
                std::string(what) + ": length must be a non-zero multiple of 8, got " +
                    std::to_string(data.size()));
  }
}

}  // namespace

RoundKeys key_schedule(ByteView key, const Rc5Params& params) {
  if (key.empty() || key.size() > kMaxKeyLen) {
    throw Error(ErrorCode::kInvalidInput,
                "RC5 key length must be 1..255 bytes, got " + std::to_string(key.size()));
  }
  if (key.size() != params.key_len) {
    throw Error(ErrorCode::kInvalidInput, "RC5 key length does not match parameters");
  }
  if (params.rounds < 1 || params.rounds > 255) {
    throw Error(ErrorCode::kInvalidInput, "RC5 rounds must be 1..255");
  }

  const std::size_t c = (key.size() + 3) / 4;
  std::vector<std::uint32_t> l(c, 0);
  for (std::size_t i = key.size(); i-- > 0;) {
    l[i / 4] = (l[i / 4] << 8) + key[i];
  }

  const std::size_t t = 2 * (static_cast<std::size_t>(params.rounds) + 1);
  std::vector<std::uint32_t> s(t);
  s[0] = kP32;
  for (std::size_t i = 1; i < t; ++i) s[i] = s[i - 1] + kQ32;

  std::uint32_t a = 0, b = 0;
  std::size_t i = 0, j = 0;
  for (std::size_t k = 0, n = 3 * std::max(t, c); k < n; ++k) {
    a = s[i] = std::rotl(s[i] + a + b, 3);
    b = l[j] = std::rotl(l[j] + a + b, static_cast<int>((a + b) & 31));
    i = (i + 1) % t;
    j = (j + 1) % c;
  }
  std::fill(l.begin(), l.end(), 0u);
  return RoundKeys(params.rounds, std::move(s));
}

RoundKeys key_schedule(ByteView key, unsigned rounds) {
  return key_schedule(key, Rc5Params{rounds, key.size()});
}

Block encrypt_block(ByteView plaintext, const RoundKeys& rk) {
  if (plaintext.size() != kBlockSize) {
    throw Error(ErrorCode::kInvalidInput, "RC5 block must be exactly 8 bytes");
  }
  Block out;
  encrypt_raw(plaintext.data(), out.data(), rk.words().data(), rk.rounds());
  return out;
}

Block decrypt_block(ByteView ciphertext, const RoundKeys& rk) {
  if (ciphertext.size() != kBlockSize) {
    throw Error(ErrorCode::kInvalidInput, "RC5 block must be exactly 8 bytes");
  }
  Block out;
  decrypt_raw(ciphertext.data(), out.data(), rk.words().data(), rk.rounds());
  return out;
}

void cbc_encrypt_det(ByteView plaintext, std::span<std::uint8_t> out,
                     const RoundKeys& rk) {
  require_blocks(plaintext, "cbc_encrypt_det");
  if (out.size() != plaintext.size()) {
    throw Error(ErrorCode::kInvalidInput, "cbc_encrypt_det: output size mismatch");
  }
  Block chain{};
  for (std::size_t off = 0; off < plaintext.size(); off += kBlockSize) {
    for (std::size_t k = 0; k < kBlockSize; ++k) chain[k] ^= plaintext[off + k];
    encrypt_raw(chain.data(), chain.data(), rk.words().data(), rk.rounds());
    std::copy(chain.begin(), chain.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
  }
}

Bytes cbc_encrypt_det(ByteView plaintext, const RoundKeys& rk) {
  Bytes out(plaintext.size());
  cbc_encrypt_det(plaintext, out, rk);
  return out;
}

Bytes cbc_decrypt_det(ByteView ciphertext, const RoundKeys& rk) {
  require_blocks(ciphertext, "cbc_decrypt_det");
  Bytes out(ciphertext.size());
  Block prev{};
  for (std::size_t off = 0; off < ciphertext.size(); off += kBlockSize) {
    Block plain;
    decrypt_raw(ciphertext.data() + off, plain.data(), rk.words().data(), rk.rounds());
    for (std::size_t k = 0; k < kBlockSize; ++k) {
      out[off + k] = plain[k] ^ prev[k];
      prev[k] = ciphertext[off + k];
    }
  }
  return out;
}

MacTag cbc_mac(ByteView message, const RoundKeys& rk, unsigned bits) {
  if (message.empty()) {
    throw Error(ErrorCode::kInvalidInput, "cbc_mac: empty message");
  }
  if (bits < kMinMacBits || bits > kMaxMacBits) {
    throw Error(ErrorCode::kInvalidInput, "cbc_mac: tag width must be 16..64 bits");
  }
  Bytes padded(message.begin(), message.end());
  padded.push_back(0x80);
  while (padded.size() % kBlockSize != 0) padded.push_back(0x00);

  Block chain{};
  for (std::size_t off = 0; off < padded.size(); off += kBlockSize) {
    for (std::size_t k = 0; k < kBlockSize; ++k) chain[k] ^= padded[off + k];
    encrypt_raw(chain.data(), chain.data(), rk.words().data(), rk.rounds());
  }
  const std::uint64_t last = get_u64_be(chain.data());
  return {bits == 64 ? last : last >> (64 - bits), bits};
}

}  // namespace geokey::cipher
