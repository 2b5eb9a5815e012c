#include "geokey/bench.hpp"

#include <chrono>

#include "geokey/error.hpp"

namespace geokey::bench {

KeyspaceReport derive_keyspace(const kdf::Deriver& deriver, kdf::TimeInterval epoch,
                               std::ostream& sink, std::uint32_t cells,
                               const keystore::LicenseeId& licensee) {
  if (cells > geo::kCellCount) {
    throw Error(ErrorCode::kInvalidInput, "more cells requested than exist");
  }
  kdf::validate(epoch);
  const auto t0 = std::chrono::steady_clock::now();
  keystore::BundleWriter writer(sink, licensee, cells);
  for (std::uint32_t i = 0; i < cells; ++i) {
    const geo::Geocode code = geo::Geocode::from_ordinal(i);
    writer.add({code, epoch, deriver.derive(code, epoch).key});
  }
  writer.finish();
  const auto t1 = std::chrono::steady_clock::now();
  return {cells, writer.bytes_written(), std::chrono::duration<double>(t1 - t0).count()};
}

}  // namespace geokey::bench
