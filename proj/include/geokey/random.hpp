#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace geokey {

// Fills `out` from the operating system CSPRNG (OpenSSL RAND_bytes).
void fill_random(std::span<std::uint8_t> out);

// UniformRandomBitGenerator over the system CSPRNG, so it can be passed
// anywhere a seeded std::mt19937_64 is accepted in tests.
class SystemRandom {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();
};

}  // namespace geokey
