#pragma once

#include <cstdint>
#include <ostream>
#include <streambuf>

#include "geokey/kdf.hpp"
#include "geokey/keystore.hpp"

namespace geokey::bench {

// Discards everything written to it but counts the bytes.
class CountingBuf : public std::streambuf {
 public:
  std::uint64_t count() const { return count_; }

 protected:
  int_type overflow(int_type ch) override {
    if (!traits_type::eq_int_type(ch, traits_type::eof())) ++count_;
    return traits_type::not_eof(ch);
  }
  std::streamsize xsputn(const char*, std::streamsize n) override {
    count_ += static_cast<std::uint64_t>(n);
    return n;
  }

 private:
  std::uint64_t count_ = 0;
};

struct KeyspaceReport {
  std::uint64_t records = 0;
  std::uint64_t bytes = 0;
  double seconds = 0.0;
};

// Derives one key per cell (the first `cells` cells in enumeration order)
// for `epoch` and streams them as a single bundle into `sink`.
KeyspaceReport derive_keyspace(const kdf::Deriver& deriver, kdf::TimeInterval epoch,
                               std::ostream& sink,
                               std::uint32_t cells = geo::kCellCount,
                               const keystore::LicenseeId& licensee = {});

}  // namespace geokey::bench
