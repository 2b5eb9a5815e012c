#include "geokey/random.hpp"

#include <openssl/rand.h>

#include <climits>

#include "geokey/error.hpp"

namespace geokey {

void fill_random(std::span<std::uint8_t> out) {
  std::size_t off = 0;
  while (off < out.size()) {
    const std::size_t n = std::min<std::size_t>(out.size() - off, INT_MAX);
    if (RAND_bytes(out.data() + off, static_cast<int>(n)) != 1) {
      throw Error(ErrorCode::kIo, "system random generator failed");
    }
    off += n;
  }
}

SystemRandom::result_type SystemRandom::operator()() {
  std::uint8_t buf[8];
  fill_random(buf);
  result_type v = 0;
  for (std::uint8_t b : buf) v = (v << 8) | b;
  return v;
}

}  // namespace geokey
