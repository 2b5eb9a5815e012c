#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "geokey/geocell.hpp"
#include "geokey/kdf.hpp"
#include "geokey/keystore.hpp"
#include "geokey/secrets.hpp"

namespace geokey::authority {

using keystore::LicenseeId;

struct LicenseRequest {
  LicenseeId licensee_id{};
  // Exactly one of polygon / cells is used; polygon wins when non-empty.
  std::vector<geo::GeoPoint> polygon;
  std::vector<geo::Geocode> cells;
  std::uint32_t start_day = 0;
  std::uint32_t end_day = 0;
  std::string purpose;
};

struct Delegation {
  LicenseeId subauthority_id{};
  std::vector<geo::Geocode> cells;
  std::uint32_t start_day = 0;
  std::uint32_t end_day = 0;
};

// Append-only UTF-8 lines: "<ISO-8601 UTC> <event> key=value ...".
class AuditLog {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  explicit AuditLog(std::optional<std::filesystem::path> file = std::nullopt,
                    Clock clock = std::chrono::system_clock::now);

  void append(const std::string& event, const std::string& fields);
  std::vector<std::string> lines() const;

 private:
  std::optional<std::filesystem::path> file_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::vector<std::string> lines_;
};

std::string iso8601(std::chrono::system_clock::time_point t);

// Holds the scheduled master key only after unlock(); until then issue and
// delegate fail with Error(kServiceUnavailable).
class Authority {
 public:
  explicit Authority(std::shared_ptr<AuditLog> audit = std::make_shared<AuditLog>());

  void unlock(std::span<const secrets::Share> shares,
              unsigned threshold = secrets::kThreshold);
  void unlock(const secrets::MasterKey& mk);
  void lock();
  bool unlocked() const;

  // Cells authorised by the request, sorted and deduplicated.
  std::vector<geo::Geocode> resolve_cells(const LicenseRequest& req) const;

  keystore::Bundle issue(const LicenseRequest& req) const;
  keystore::Bundle delegate(const Delegation& d) const;

  AuditLog& audit() const { return *audit_; }

 private:
  keystore::Bundle derive_bundle(const LicenseeId& id,
                                 const std::vector<geo::Geocode>& cells,
                                 const std::vector<kdf::TimeInterval>& epochs) const;
  std::shared_ptr<const kdf::Deriver> deriver() const;

  std::shared_ptr<AuditLog> audit_;
  mutable std::shared_mutex mutex_;
  std::shared_ptr<const kdf::Deriver> deriver_;
};

}  // namespace geokey::authority
