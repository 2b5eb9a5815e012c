#include "geokey/secrets.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <string>

#include "geokey/error.hpp"
#include "geokey/random.hpp"

namespace geokey::secrets {

namespace gf256 {

namespace {

struct Tables {
  std::array<std::uint8_t, 512> exp{};
  std::array<std::uint8_t, 256> log{};

  Tables() {
    std::uint8_t x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = x;
      log[x] = static_cast<std::uint8_t>(i);
      // multiply by the generator 0x03
      const std::uint8_t hi = x & 0x80;
      std::uint8_t x2 = static_cast<std::uint8_t>(x << 1);
      if (hi) x2 ^= 0x1B;
      x ^= x2;
    }
    for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

std::uint8_t mul(std::uint8_t a, std::uint8_t b) {
  if (a == 0 || b == 0) return 0;
  const auto& t = tables();
  return t.exp[t.log[a] + t.log[b]];
}

std::uint8_t inv(std::uint8_t a) {
  if (a == 0) throw Error(ErrorCode::kInvalidInput, "GF(256) inverse of zero");
  const auto& t = tables();
  return t.exp[255 - t.log[a]];
}

std::uint8_t interpolate(std::span<const std::uint8_t> xs,
                         std::span<const std::uint8_t> ys, std::uint8_t x) {
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::uint8_t num = 1;
    std::uint8_t den = 1;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (i == j) continue;
      num = mul(num, x ^ xs[j]);
      den = mul(den, xs[i] ^ xs[j]);
    }
    acc ^= mul(ys[i], mul(num, inv(den)));
  }
  return acc;
}

}  // namespace gf256

Contribution make_contribution(unsigned participant_id,
                               std::uint32_t declared_entropy_bits) {
  if (participant_id < 1 || participant_id > kParticipants) {
    throw Error(ErrorCode::kInvalidInput, "participant id must be 1..11");
  }
  Contribution c;
  c.participant_id = participant_id;
  c.declared_entropy_bits = declared_entropy_bits;
  fill_random(c.material);
  return c;
}

MasterKey assemble_master_key(std::span<const Contribution> contributions,
                              const CeremonyId& ceremony_id) {
  if (contributions.size() != kParticipants) {
    throw Error(ErrorCode::kInvalidInput,
                "ceremony needs exactly 11 contributions, got " +
                    std::to_string(contributions.size()));
  }
  std::array<const Contribution*, kParticipants> by_id{};
  for (const Contribution& c : contributions) {
    if (c.participant_id < 1 || c.participant_id > kParticipants) {
      throw Error(ErrorCode::kInvalidInput,
                  "participant id out of range: " + std::to_string(c.participant_id));
    }
    if (by_id[c.participant_id - 1] != nullptr) {
      throw Error(ErrorCode::kInvalidInput,
                  "duplicate participant " + std::to_string(c.participant_id));
    }
    by_id[c.participant_id - 1] = &c;
  }

  MasterKey mk;
  mk.ceremony_id = ceremony_id;
  auto out = mk.key.begin();
  for (const Contribution* c : by_id) {
    out = std::copy(c->material.begin(), c->material.end(), out);
    mk.total_entropy_bits += c->declared_entropy_bits;
  }
  *out++ = kKeyVersionTag;
  *out++ = 0x00;
  return mk;
}

std::vector<Share> split_with_coefficients(const MasterKey& mk, unsigned k,
                                           unsigned n, ByteView coefficients) {
  if (k < 2 || k > n || n > 255) {
    throw Error(ErrorCode::kInvalidInput,
                "threshold parameters must satisfy 2 <= k <= n <= 255");
  }
  if (coefficients.size() != kMasterKeyLen * (k - 1)) {
    throw Error(ErrorCode::kInvalidInput, "wrong number of coefficient bytes");
  }
  std::vector<Share> shares(n);
  for (unsigned i = 0; i < n; ++i) {
    shares[i].x = static_cast<std::uint8_t>(i + 1);
    shares[i].ceremony_id = mk.ceremony_id;
  }
  for (std::size_t b = 0; b < kMasterKeyLen; ++b) {
    const std::uint8_t* coeff = coefficients.data() + b * (k - 1);
    for (Share& s : shares) {
      // Horner: a_{k-1} x^{k-1} + ... + a_1 x + secret
      std::uint8_t acc = 0;
      for (unsigned d = k - 1; d >= 1; --d) {
        acc = gf256::mul(acc, s.x) ^ coeff[d - 1];
      }
      s.y[b] = gf256::mul(acc, s.x) ^ mk.key[b];
    }
  }
  return shares;
}

std::vector<Share> split(const MasterKey& mk, unsigned k, unsigned n) {
  SystemRandom rng;
  return split(mk, k, n, rng);
}

MasterKey combine(std::span<const Share> shares, unsigned k) {
  if (k < 2) throw Error(ErrorCode::kInvalidInput, "threshold must be at least 2");
  if (shares.size() < k) {
    throw Error(ErrorCode::kThresholdNotMet,
                "need " + std::to_string(k) + " shares, got " +
                    std::to_string(shares.size()));
  }
  std::array<bool, 256> seen{};
  for (const Share& s : shares) {
    if (s.x == 0) throw Error(ErrorCode::kInvalidShares, "share with x = 0");
    if (seen[s.x]) {
      throw Error(ErrorCode::kInvalidShares,
                  "duplicate share x = " + std::to_string(s.x));
    }
    seen[s.x] = true;
    if (s.ceremony_id != shares[0].ceremony_id) {
      throw Error(ErrorCode::kInvalidShares, "shares from different ceremonies");
    }
  }

  std::vector<std::uint8_t> xs(k);
  std::vector<std::uint8_t> ys(k);
  for (unsigned i = 0; i < k; ++i) xs[i] = shares[i].x;

  MasterKey mk;
  mk.ceremony_id = shares[0].ceremony_id;
  for (std::size_t b = 0; b < kMasterKeyLen; ++b) {
    for (unsigned i = 0; i < k; ++i) ys[i] = shares[i].y[b];
    mk.key[b] = gf256::interpolate(xs, ys, 0);
    for (std::size_t e = k; e < shares.size(); ++e) {
      if (gf256::interpolate(xs, ys, shares[e].x) != shares[e].y[b]) {
        throw Error(ErrorCode::kIntegrity,
                    "share x = " + std::to_string(shares[e].x) +
                        " is inconsistent with the others");
      }
    }
  }
  return mk;
}

// ---- files ----

namespace {

void append_crc(Bytes& out) { put_u32_be(out, crc32(out)); }

void check_frame(ByteView data, std::string_view magic, std::size_t size,
                 const char* what) {
  if (data.size() != size) {
    throw Error(ErrorCode::kFormat, std::string(what) + ": wrong file size " +
                                        std::to_string(data.size()));
  }
  if (!std::equal(magic.begin(), magic.end(), data.begin())) {
    throw Error(ErrorCode::kFormat, std::string(what) + ": bad magic");
  }
  if (data[4] != kFileVersion) {
    throw Error(ErrorCode::kFormat, std::string(what) + ": unsupported version");
  }
  if (crc32(data.first(size - 4)) != get_u32_be(data.data() + size - 4)) {
    throw Error(ErrorCode::kIntegrity, std::string(what) + ": checksum mismatch");
  }
}

void put_magic(Bytes& out, std::string_view magic) {
  out.insert(out.end(), magic.begin(), magic.end());
  out.push_back(kFileVersion);
}

constexpr std::size_t kContributionFileSize = 4 + 1 + 1 + 4 + kContributionLen + 4;
constexpr std::size_t kMasterKeyFileSize = 4 + 1 + 16 + 8 + kMasterKeyLen + 4;

}  // namespace

Bytes serialize_share(const Share& share) {
  Bytes out;
  out.reserve(kShareFileSize);
  put_magic(out, "GKSH");
  out.insert(out.end(), share.ceremony_id.begin(), share.ceremony_id.end());
  out.push_back(share.x);
  out.insert(out.end(), share.y.begin(), share.y.end());
  append_crc(out);
  return out;
}

Share parse_share(ByteView data) {
  check_frame(data, "GKSH", kShareFileSize, "share file");
  Share s;
  std::copy_n(data.begin() + 5, 16, s.ceremony_id.begin());
  s.x = data[21];
  std::copy_n(data.begin() + 22, kMasterKeyLen, s.y.begin());
  if (s.x == 0) throw Error(ErrorCode::kFormat, "share file: x = 0");
  return s;
}

Bytes serialize_contribution(const Contribution& c) {
  Bytes out;
  put_magic(out, "GKCT");
  out.push_back(static_cast<std::uint8_t>(c.participant_id));
  put_u32_be(out, c.declared_entropy_bits);
  out.insert(out.end(), c.material.begin(), c.material.end());
  append_crc(out);
  return out;
}

Contribution parse_contribution(ByteView data) {
  check_frame(data, "GKCT", kContributionFileSize, "contribution file");
  Contribution c;
  c.participant_id = data[5];
  c.declared_entropy_bits = get_u32_be(data.data() + 6);
  std::copy_n(data.begin() + 10, kContributionLen, c.material.begin());
  return c;
}

Bytes serialize_master_key(const MasterKey& mk) {
  Bytes out;
  put_magic(out, "GKMK");
  out.insert(out.end(), mk.ceremony_id.begin(), mk.ceremony_id.end());
  put_u64_be(out, mk.total_entropy_bits);
  out.insert(out.end(), mk.key.begin(), mk.key.end());
  append_crc(out);
  return out;
}

MasterKey parse_master_key(ByteView data) {
  check_frame(data, "GKMK", kMasterKeyFileSize, "master key file");
  MasterKey mk;
  std::copy_n(data.begin() + 5, 16, mk.ceremony_id.begin());
  mk.total_entropy_bits = get_u64_be(data.data() + 21);
  std::copy_n(data.begin() + 29, kMasterKeyLen, mk.key.begin());
  return mk;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace geokey::secrets
